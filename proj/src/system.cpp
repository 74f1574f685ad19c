#include "scb/system.hpp"
#include "scb/error.hpp"

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>

namespace scb {

namespace bm = boost::multiprecision;

const quad& pi_q()
{
    static const quad p = bm::acos(quad(-1));
    return p;
}

bool BilliardSpec::bounded() const
{
    for (const auto& m : mu)
        if (!(m > Number(0)))
            return false;
    return true;
}

bool BilliardSpec::exact() const
{
    for (const auto& m : mu)
        if (!m.exact())
            return false;
    for (const auto& x : u)
        if (!x.exact())
            return false;
    return true;
}

void BilliardSpec::validate() const
{
    if (r < 2)
        throw Error(ErrorCode::InvalidSpec, "degree r must be at least 2");
    if (mu.size() != static_cast<size_t>(r + 1) || u.size() != static_cast<size_t>(r + 1))
        throw Error(ErrorCode::InvalidSpec, "need r+1 angles and r+1 prevertices");
    for (const auto& m : mu)
        if (!(m > Number(-2) && m < Number(2)))
            throw Error(ErrorCode::InvalidSpec, "angle weight " + m.str() + " outside (-2, 2)");
    for (int a = 0; a < r; ++a)
        if (!(u[a] < u[a + 1]))
            throw Error(ErrorCode::InvalidSpec, "prevertices must be strictly increasing");
    Number s(0);
    for (const auto& m : mu)
        s += m;
    Number target(r - 1);
    bool ok;
    if (s.exact())
        ok = s.rational() == target.rational();
    else
        ok = bm::abs(s.value() - target.value()) <= quad(1e-12) * target.value();
    if (!ok)
        throw Error(ErrorCode::InvalidSpec,
                    "sum rule violated: sum of mu is " + s.str() + ", expected r-1 = " + target.str());
}

std::vector<double> BilliardSpec::mu_d() const
{
    std::vector<double> v;
    for (const auto& m : mu)
        v.push_back(m.to_double());
    return v;
}

std::vector<double> BilliardSpec::u_d() const
{
    std::vector<double> v;
    for (const auto& x : u)
        v.push_back(x.to_double());
    return v;
}

std::vector<quad> BilliardSpec::mu_q() const
{
    std::vector<quad> v;
    for (const auto& m : mu)
        v.push_back(m.value());
    return v;
}

std::vector<quad> BilliardSpec::u_q() const
{
    std::vector<quad> v;
    for (const auto& x : u)
        v.push_back(x.value());
    return v;
}

std::string BilliardSpec::canonical() const
{
    std::ostringstream os;
    os << "r=" << r << ";mu=";
    for (size_t a = 0; a < mu.size(); ++a)
        os << (a ? "," : "") << mu[a].str();
    os << ";u=";
    for (size_t a = 0; a < u.size(); ++a)
        os << (a ? "," : "") << u[a].str();
    return os.str();
}

BilliardSpec make_spec(int r, std::vector<Number> mu, std::vector<Number> u)
{
    BilliardSpec s;
    s.r = r;
    s.mu = std::move(mu);
    s.u = std::move(u);
    s.validate();
    return s;
}

std::vector<Number> default_prevertices(int r)
{
    std::vector<Number> u;
    for (int a = 0; a <= r; ++a)
        u.push_back(Number(Rational(2 * (a - r / 2) - 1, 2)));
    return u;
}

Polynomial ODESystem::S() const
{
    return Q().shift_up() - P();
}

std::string ODESystem::str() const
{
    auto term = [this](const std::vector<Number>& c) {
        std::ostringstream os;
        bool first = true;
        for (int j = r; j >= 0; --j) {
            const Number& a = c[j];
            if (a.is_zero())
                continue;
            bool neg = a < Number(0);
            Number m = neg ? -a : a;
            os << (first ? (neg ? "-" : "") : (neg ? " - " : " + "));
            bool unit = m.exact() && m.rational() == 1;
            if (!unit)
                os << m.str() << "*";
            std::string mono;
            if (j > 0)
                mono += "x1" + (j > 1 ? "^" + std::to_string(j) : std::string());
            if (r - j > 0)
                mono += (mono.empty() ? "" : "*") + std::string("x2") +
                        (r - j > 1 ? "^" + std::to_string(r - j) : std::string());
            os << mono;
            first = false;
        }
        return first ? std::string("0") : os.str();
    };
    std::vector<Number> pp(p), qq(q);
    pp.resize(r + 1);
    qq.resize(r + 1);
    return "x1' = " + term(pp) + "\nx2' = " + term(qq);
}

ODESystem build_system(const BilliardSpec& spec)
{
    spec.validate();
    int r = spec.r;
    // (r-1) Q = sum_a mu_a prod_{b != a} (u - u_b)
    Polynomial acc;
    for (int a = 0; a <= r; ++a) {
        std::vector<Number> others;
        for (int b = 0; b <= r; ++b)
            if (b != a)
                others.push_back(spec.u[b]);
        acc = acc + spec.mu[a] * poly_from_roots(others);
    }
    Polynomial Q = (Number(1) / Number(r - 1)) * acc;
    std::vector<Number> qc = Q.coeffs();
    qc.resize(r + 1);
    // leading coefficient is sum(mu)/(r-1); exact 1 for exact specs, forced for float specs
    qc[r] = Number(1);
    Q = Polynomial(qc);
    Polynomial S = poly_from_roots(spec.u);
    Polynomial P = Q.shift_up() - S;
    ODESystem sys;
    sys.r = r;
    sys.p = P.coeffs();
    sys.q = qc;
    sys.p.resize(r + 1);
    sys.q.resize(r + 1);
    return sys;
}

BilliardSpec recover_spec(const ODESystem& sys)
{
    int r = sys.r;
    if (r < 2)
        throw Error(ErrorCode::InvalidSpec, "degree r must be at least 2");
    Polynomial Q = sys.Q();
    if (Q.degree() != r || !Q.monic())
        throw Error(ErrorCode::InvalidSpec, "q(u,1) must be monic of degree r");
    if (sys.P().degree() > r)
        throw Error(ErrorCode::InvalidSpec, "p has degree above r");
    Polynomial S = sys.S();
    auto z = complex_roots(S);
    quad scale = 1;
    for (auto& x : z)
        scale = std::max(scale, quad(abs(x)));
    for (auto& x : z)
        if (bm::abs(x.imag()) > quad(1e-20) * scale)
            throw Error(ErrorCode::ComplexRoots, "S(u) = " + S.str() + " has non-real roots");
    for (size_t i = 0; i + 1 < z.size(); ++i)
        if (z[i + 1].real() - z[i].real() < quad(1e-14) * scale)
            throw Error(ErrorCode::MultipleRoots, "S(u) = " + S.str() + " has a repeated root");
    std::vector<Number> roots;
    for (auto& x : z) {
        quad v = x.real();
        if (S.exact()) {
            Rational q = rationalize(v, 1000000000000LL);
            if (S.eval(Number(q)).is_zero()) {
                roots.push_back(Number(q));
                continue;
            }
        }
        roots.push_back(Number::approx(v));
    }
    // weights from the original S so that exact coefficients are used throughout
    Polynomial dS = S.derivative();
    std::vector<Number> mu;
    for (const auto& a : roots) {
        Number d = dS.eval(a);
        if (d.is_zero())
            throw Error(ErrorCode::DegenerateResidue, "S'(" + a.str() + ") vanishes");
        mu.push_back(Number(r - 1) * Q.eval(a) / d);
    }
    BilliardSpec spec;
    spec.r = r;
    spec.mu = mu;
    spec.u = roots;
    spec.validate();
    return spec;
}

ODESystem newtonian_system(const Number& k)
{
    if (k == Number(1))
        throw Error(ErrorCode::InvalidParameter, "k = 1 has no reduction");
    ODESystem sys;
    sys.r = 2;
    sys.p = {Number(0), Number(1), Number(0)};
    sys.q = {Number(2) / (Number(1) - k), Number(0), Number(1)};
    return sys;
}

namespace {

// principal branch with real u taken from the upper side
cquad upper_diff(const cquad& u0, const quad& ua)
{
    cquad d = u0 - cquad(ua);
    if (d.imag() == 0)
        d = cquad(d.real(), quad(0));
    return d;
}

quad wrap_2pi(quad x)
{
    quad two = 2 * pi_q();
    x = bm::fmod(x, two);
    if (x < 0)
        x += two;
    return x;
}

void check_not_prevertex(const BilliardSpec& spec, const cquad& u0)
{
    for (const auto& a : spec.u)
        if (u0.imag() == 0 && u0.real() == a.value())
            throw Error(ErrorCode::SingularInitial, "u0 coincides with prevertex " + a.str());
}

// prod (u0 - u_a)^{s mu_a}, principal per factor
cquad factor_product(const BilliardSpec& spec, const cquad& u0, const quad& s)
{
    quad logmod = 0, ph = 0;
    for (int a = 0; a <= spec.r; ++a) {
        cquad d = upper_diff(u0, spec.u[a].value());
        quad m = s * spec.mu[a].value();
        logmod += m * bm::log(quad(abs(d)));
        ph += m * bm::atan2(d.imag(), d.real());
    }
    quad R = bm::exp(logmod);
    return cquad(R * bm::cos(ph), R * bm::sin(ph));
}

} // namespace

cquad conserved_C(const BilliardSpec& spec, const cquad& x1, const cquad& x2)
{
    if (x2 == cquad(0))
        throw Error(ErrorCode::SingularInitial, "x2 = 0");
    cquad u0 = x1 / x2;
    return x2 * factor_product(spec, u0, quad(1) / quad(spec.r - 1));
}

InitialCondition state_from(const BilliardSpec& spec, const cquad& u0, const quad& chi0)
{
    spec.validate();
    check_not_prevertex(spec, u0);
    cquad e(bm::cos(chi0), bm::sin(chi0));
    InitialCondition ic;
    ic.u0 = u0;
    ic.chi0 = wrap_2pi(chi0);
    ic.x2 = -e * factor_product(spec, u0, quad(-1) / quad(spec.r - 1));
    ic.x1 = u0 * ic.x2;
    return ic;
}

InitialCondition normalize_initial(const BilliardSpec& spec, const cquad& x1, const cquad& x2)
{
    spec.validate();
    if (x2 == cquad(0))
        throw Error(ErrorCode::SingularInitial, "x2 = 0");
    cquad u0 = x1 / x2;
    check_not_prevertex(spec, u0);
    cquad C = conserved_C(spec, x1, x2);
    quad lam = 1 / quad(abs(C));
    InitialCondition ic;
    ic.u0 = u0;
    ic.x1 = x1 * lam;
    ic.x2 = x2 * lam;
    cquad mC = -C * lam;
    ic.chi0 = wrap_2pi(bm::atan2(mC.imag(), mC.real()));
    return ic;
}

quad phase_for_direction(int r, const quad& chi_b)
{
    // -C^(r-1) = e^{i chi_b} with C = e^{i (chi_b + pi)/(r-1)}, chi0 = arg(-C)
    return wrap_2pi((chi_b + pi_q()) / quad(r - 1) + pi_q());
}

quad direction_for_phase(int r, const quad& chi0)
{
    // C = -e^{i chi0}; direction = arg(-C^(r-1))
    return wrap_2pi(pi_q() + quad(r - 1) * (chi0 + pi_q()));
}

quad perpendicular_phase(const BilliardSpec& spec, const quad& u0)
{
    check_not_prevertex(spec, cquad(u0));
    quad th = 0;
    for (int a = 0; a <= spec.r; ++a) {
        cquad d = upper_diff(cquad(u0), spec.u[a].value());
        th += (spec.mu[a].value() - 1) * bm::atan2(d.imag(), d.real());
    }
    return phase_for_direction(spec.r, th + pi_q() / 2);
}

nlohmann::json number_to_json(const Number& x)
{
    if (x.exact())
        return x.str();
    return static_cast<double>(x.value());
}

Number number_from_json(const nlohmann::json& j)
{
    if (j.is_string())
        return Number::parse(j.get<std::string>());
    if (j.is_number_integer())
        return Number(static_cast<long long>(j.get<long long>()));
    if (j.is_number())
        return Number::approx(j.get<double>());
    throw Error(ErrorCode::InvalidInput, "expected a number, got " + j.dump());
}

nlohmann::json spec_to_json(const BilliardSpec& spec)
{
    nlohmann::json j;
    j["r"] = spec.r;
    j["mu"] = nlohmann::json::array();
    for (const auto& m : spec.mu)
        j["mu"].push_back(number_to_json(m));
    j["u"] = nlohmann::json::array();
    for (const auto& x : spec.u)
        j["u"].push_back(number_to_json(x));
    return j;
}

SpecFile spec_file_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("r") || !j.contains("mu"))
        throw Error(ErrorCode::InvalidInput, "spec needs fields r and mu");
    SpecFile f;
    f.spec.r = j.at("r").get<int>();
    for (const auto& m : j.at("mu"))
        f.spec.mu.push_back(number_from_json(m));
    if (j.contains("u")) {
        for (const auto& x : j.at("u"))
            f.spec.u.push_back(number_from_json(x));
    } else {
        f.spec.u = default_prevertices(f.spec.r);
    }
    f.spec.validate();
    if (j.contains("u0")) {
        const auto& v = j.at("u0");
        if (v.is_array()) {
            if (v.size() != 2)
                throw Error(ErrorCode::InvalidInput, "u0 must be [re, im]");
            f.u0 = cquad(number_from_json(v[0]).value(), number_from_json(v[1]).value());
        } else {
            f.u0 = cquad(number_from_json(v).value());
        }
    }
    if (j.contains("chi0"))
        f.chi0 = number_from_json(j.at("chi0")).value();
    return f;
}

nlohmann::json spec_file_to_json(const SpecFile& f)
{
    nlohmann::json j = spec_to_json(f.spec);
    if (f.u0)
        j["u0"] = {static_cast<double>(f.u0->real()), static_cast<double>(f.u0->imag())};
    if (f.chi0)
        j["chi0"] = static_cast<double>(*f.chi0);
    return j;
}

std::string spec_hash(const BilliardSpec& spec)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : spec.canonical()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace scb
