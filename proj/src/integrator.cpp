#include "scb/integrator.hpp"
#include "scb/dop853.hpp"
#include "scb/error.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace scb {

namespace bm = boost::multiprecision;

void IntegrationConfig::validate() const
{
    if (!(rel_tol > 0) || !(abs_tol > 0))
        throw Error(ErrorCode::InvalidParameter, "tolerances must be positive");
    if (precision_digits < 15)
        throw Error(ErrorCode::InvalidParameter, "precision_digits must be at least 15");
    if (precision_digits > 33)
        throw Error(ErrorCode::UnsupportedPrecision,
                    "precision_digits " + std::to_string(precision_digits) + " exceeds the 33 digits of float128");
    if (max_step < 0 || min_step < 0)
        throw Error(ErrorCode::InvalidParameter, "step bounds must be non-negative");
    if (!std::isfinite(t_end))
        throw Error(ErrorCode::InvalidParameter, "t_end must be finite");
    if (!(overflow_guard > 1))
        throw Error(ErrorCode::InvalidParameter, "overflow_guard must exceed 1");
}

int effective_digits(int d)
{
    if (d <= 15)
        return 15;
    if (d <= 18)
        return 18;
    if (d <= 33)
        return 33;
    throw Error(ErrorCode::UnsupportedPrecision, "at most 33 digits are available");
}

const char* status_name(TrajStatus s)
{
    switch (s) {
    case TrajStatus::Completed: return "Completed";
    case TrajStatus::BlowUp: return "BlowUp";
    case TrajStatus::ToleranceFailure: return "ToleranceFailure";
    }
    return "?";
}

int side_of(const std::vector<double>& u, double x)
{
    int r = static_cast<int>(u.size()) - 1;
    for (int a = 0; a < r; ++a)
        if (x > u[a] && x < u[a + 1])
            return a;
    return r;
}

namespace {

// math shims so one template covers double, long double and float128
template <class Real> Real rabs(const Real& x) { using std::abs; using bm::abs; return abs(x); }
template <class Real> Real rlog(const Real& x) { using std::log; using bm::log; return log(x); }
template <class Real> Real rexp(const Real& x) { using std::exp; using bm::exp; return exp(x); }
template <class Real> Real rround(const Real& x) { using std::round; using bm::round; return round(x); }
template <class Real> Real ratan2(const Real& y, const Real& x) { using std::atan2; using bm::atan2; return atan2(y, x); }
template <class Real> Real rcos(const Real& x) { using std::cos; using bm::cos; return cos(x); }
template <class Real> Real rsin(const Real& x) { using std::sin; using bm::sin; return sin(x); }
template <class Real> Real rsqrt(const Real& x) { using std::sqrt; using bm::sqrt; return sqrt(x); }

template <class Real> Real cabs(const std::complex<Real>& z) { return rsqrt(z.real() * z.real() + z.imag() * z.imag()); }
template <class Real> Real carg(const std::complex<Real>& z) { return ratan2(z.imag(), z.real()); }
template <class Real> std::complex<Real> cexp(const std::complex<Real>& z)
{
    Real m = rexp(z.real());
    return {m * rcos(z.imag()), m * rsin(z.imag())};
}
template <class Real> std::complex<Real> clog(const std::complex<Real>& z) { return {rlog(cabs(z)), carg(z)}; }

template <class Real> Real from_quad(const quad& x)
{
    if constexpr (std::is_same_v<Real, quad>)
        return x;
    else
        return static_cast<Real>(x);
}

template <class Real> Real from_number(const Number& x)
{
    if constexpr (std::is_same_v<Real, quad>)
        return x.value();
    else if constexpr (std::is_same_v<Real, long double>) {
        if (x.exact()) {
            const Rational& q = x.rational();
            return static_cast<long double>(bm::numerator(q).convert_to<long double>()) /
                   bm::denominator(q).convert_to<long double>();
        }
        return static_cast<long double>(x.value());
    } else
        return x.to_double();
}

template <class Real> std::complex<Real> from_cquad(const cquad& z)
{
    return {from_quad<Real>(z.real()), from_quad<Real>(z.imag())};
}

template <class Real> cdouble to_cd(const std::complex<Real>& z)
{
    return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

template <class Real> cquad to_cq(const std::complex<Real>& z)
{
    return {quad(z.real()), quad(z.imag())};
}

template <class Real> Real pi_r() { return real_from_string<Real>("3.14159265358979323846264338327950288"); }

template <class Real> Real machine_eps() { return std::numeric_limits<Real>::epsilon(); }

constexpr int kMaxDegree = 16;

template <class Real>
struct PolyRhs {
    using C = std::complex<Real>;
    using State = std::array<C, 2>;
    int r = 2;
    std::vector<Real> p, q;
    void operator()(const State& y, State& dy) const
    {
        std::array<C, kMaxDegree + 1> a, b;
        a[0] = C(1);
        b[0] = C(1);
        for (int j = 1; j <= r; ++j) {
            a[j] = a[j - 1] * y[0];
            b[j] = b[j - 1] * y[1];
        }
        C s1(0), s2(0);
        for (int j = 0; j <= r; ++j) {
            C m = a[j] * b[r - j];
            s1 += p[j] * m;
            s2 += q[j] * m;
        }
        dy[0] = s1;
        dy[1] = s2;
    }
};

// sign-change brackets of g over a step; interior points are probed only
// when the endpoint slopes say that g dips toward zero and back
template <class Real, class GFun>
std::vector<std::pair<Real, Real>> find_brackets(const Real& g0, const Real& g1, const Real& dg0, const Real& dg1,
                                                 GFun&& g)
{
    std::vector<std::pair<Real, Real>> out;
    auto sgn = [](const Real& x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); };
    if (g0 == 0)
        return out;
    if (sgn(g0) != sgn(g1) && g1 != 0) {
        out.emplace_back(Real(0), Real(1));
        return out;
    }
    if (g1 == 0)
        return out;
    // same sign at both ends: look for a dip only if the slopes allow one
    bool toward = sgn(dg0) == -sgn(g0);
    bool away = sgn(dg1) == sgn(g1);
    if (!(toward && away))
        return out;
    const int K = 8;
    Real sp = 0, gp = g0;
    for (int k = 1; k <= K; ++k) {
        Real s = Real(k) / Real(K);
        Real gs = k == K ? g1 : g(s);
        if (gs != 0 && sgn(gs) != sgn(gp) && gp != 0)
            out.emplace_back(sp, s);
        if (gs != 0) {
            sp = s;
            gp = gs;
        }
    }
    return out;
}

template <class Real, class GFun>
Real refine_root(Real a, Real b, GFun&& g)
{
    Real ga = g(a), gb = g(b);
    if (ga == 0)
        return a;
    if (gb == 0)
        return b;
    boost::uintmax_t it = 200;
    auto tol = boost::math::tools::eps_tolerance<Real>(std::numeric_limits<Real>::digits - 3);
    auto res = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, it);
    Real m = (res.first + res.second) / 2;
    return m;
}

template <class Real>
struct Watch {
    std::vector<Real> mu, u;
    int r = 2;
};

template <class Real>
Trajectory run_direct(const ODESystem& sys, const BilliardSpec& spec, const InitialCondition& init,
                      const IntegrationConfig& cfg, const StepObserver& observer)
{
    using C = std::complex<Real>;
    using State = std::array<C, 2>;
    const int r = sys.r;
    if (r > kMaxDegree)
        throw Error(ErrorCode::InvalidParameter, "degree above 16 is not supported");
    PolyRhs<Real> f;
    f.r = r;
    for (int j = 0; j <= r; ++j) {
        f.p.push_back(from_number<Real>(j < static_cast<int>(sys.p.size()) ? sys.p[j] : Number(0)));
        f.q.push_back(from_number<Real>(j < static_cast<int>(sys.q.size()) ? sys.q[j] : Number(0)));
    }
    std::vector<Real> mu, uu;
    for (const auto& m : spec.mu)
        mu.push_back(from_number<Real>(m));
    for (const auto& x : spec.u)
        uu.push_back(from_number<Real>(x));
    std::vector<double> ud = spec.u_d();

    Real rtol = Real(cfg.rel_tol), atol = Real(cfg.abs_tol);
    if (rtol < Real(4) * machine_eps<Real>())
        rtol = Real(4) * machine_eps<Real>();
    Dop853<Real, 2, PolyRhs<Real>> st(f, rtol, atol);
    const Real t0 = 0, tend = Real(cfg.t_end);
    const int dir = tend >= t0 ? 1 : -1;
    State y0{from_cquad<Real>(init.x1), from_cquad<Real>(init.x2)};
    Real hmax = cfg.max_step > 0 ? Real(cfg.max_step) : Real(1e30);
    if (y0[0] == C(0) && y0[1] == C(0))
        throw Error(ErrorCode::SingularInitial, "zero initial state");
    st.init(t0, y0, Real(0), dir, hmax);

    Trajectory tr;
    tr.digits = effective_digits(cfg.precision_digits);
    auto devC = [&](const State& y) { return abs_C<Real>(mu, uu, r, y[0], y[1]) - Real(1); };
    auto push_sample = [&](const Real& t, const State& y) {
        Sample s;
        s.t = static_cast<double>(t);
        s.x1 = to_cd(y[0]);
        s.x2 = to_cd(y[1]);
        s.u = y[1] != C(0) ? to_cd(C(y[0] / y[1])) : cdouble(INFINITY, 0);
        s.dev = static_cast<double>(devC(y));
        if (y[1] != C(0)) {
            // offset from the nearest prevertex without the cancellation in double
            Real best = -1;
            for (int a = 0; a <= r; ++a) {
                C d = C(y[0] - uu[a] * y[1]) / y[1];
                Real m = cabs(d);
                if (best < 0 || m < best) {
                    best = m;
                    s.du = to_cd(d);
                    s.near = a;
                }
            }
        }
        tr.samples.push_back(s);
    };
    {
        double d0 = static_cast<double>(devC(y0));
        tr.max_dev = std::abs(d0);
        if (cfg.store_samples)
            push_sample(t0, y0);
    }
    auto gval = [](const State& y) { return (y[0] * std::conj(y[1])).imag(); };
    auto dgval = [](const State& y, const State& dy) {
        return (dy[0] * std::conj(y[1]) + y[0] * std::conj(dy[1])).imag();
    };
    Real next_sample = cfg.sample_dt > 0 ? Real(dir * cfg.sample_dt) : Real(0);
    auto mag = [](const State& y) { return std::max(cabs(y[0]), cabs(y[1])); };
    auto blow_estimate = [&](const Real& t, const State& y, const State& dy) {
        // |x2| ~ (t_c - t)^(-1/(r-1)) => t_c = t + 1/((r-1) d ln|x2|/dt)
        int k = cabs(y[0]) > cabs(y[1]) ? 0 : 1;
        Real rate = (dy[k] / y[k]).real() * Real(dir);
        tr.t_blowup = rate > 0 ? static_cast<double>(t + Real(dir) / (Real(r - 1) * rate)) : static_cast<double>(t);
        C uc = y[1] != C(0) ? C(y[0] / y[1]) : C(Real(1e300));
        int best = 0;
        for (int a = 0; a <= r; ++a)
            if (cabs(C(uc - uu[a])) < cabs(C(uc - uu[best])))
                best = a;
        tr.corner_index = best;
    };

    tr.status = TrajStatus::Completed;
    for (;;) {
        if ((st.t() - tend) * Real(dir) >= 0)
            break;
        if (cfg.max_steps > 0 && st.naccept() >= cfg.max_steps) {
            tr.status = TrajStatus::ToleranceFailure;
            break;
        }
        Real hmin = std::max(Real(cfg.min_step), Real(16) * machine_eps<Real>() * rabs(st.t()));
        State yprev = st.y(), fprev = st.f_new();
        auto res = st.step(tend, hmin);
        if (res != decltype(st)::StepStatus::Accepted) {
            if (mag(yprev) > Real(1e3)) {
                tr.status = TrajStatus::BlowUp;
                blow_estimate(st.t(), yprev, fprev);
            } else
                tr.status = TrajStatus::ToleranceFailure;
            break;
        }
        const State& y1 = st.y();
        Real dv = rabs(devC(y1));
        tr.max_dev = std::max(tr.max_dev, static_cast<double>(dv));
        const Real ta = st.t_old(), tb = st.t(), h = st.h_last();

        if (cfg.detect_events) {
            Real g0 = gval(yprev), g1 = gval(y1);
            Real dg0 = dgval(yprev, fprev) * h, dg1 = dgval(y1, st.f_new()) * h;
            auto gs = [&](const Real& s) { return gval(st.dense(s)); };
            auto br = find_brackets<Real>(g0, g1, dg0, dg1, gs);
            for (auto& b : br) {
                Real s = refine_root<Real>(b.first, b.second, gs);
                State ye = st.dense(s);
                CrossingEvent ev;
                ev.t = static_cast<double>(ta + s * h);
                C ue = ye[1] != C(0) ? C(ye[0] / ye[1]) : C(Real(1e300));
                ev.u = static_cast<double>(ue.real());
                Real gb = gs(b.second), ga = gs(b.first);
                ev.direction = (gb - ga) * Real(dir) > 0 ? 1 : -1;
                ev.side = side_of(ud, ev.u);
                ev.pole = rabs(ue.real()) > Real(1) / Real(cfg.pole_eps);
                double dmin = INFINITY;
                for (double x : ud)
                    dmin = std::min(dmin, std::abs(ev.u - x));
                ev.near_corner = dmin < cfg.corner_guard;
                ev.x1 = to_cd(ye[0]);
                ev.x2 = to_cd(ye[1]);
                tr.events.push_back(ev);
            }
        }
        if (cfg.store_samples) {
            if (cfg.sample_dt > 0) {
                while ((next_sample - tb) * Real(dir) <= 0) {
                    Real s = (next_sample - ta) / h;
                    push_sample(next_sample, st.dense(s));
                    next_sample += Real(dir * cfg.sample_dt);
                }
            } else
                push_sample(tb, y1);
        }
        if (observer) {
            StepView v;
            v.t0 = static_cast<double>(ta);
            v.t1 = static_cast<double>(tb);
            v.y0 = {to_cd(yprev[0]), to_cd(yprev[1])};
            v.y1 = {to_cd(y1[0]), to_cd(y1[1])};
            v.at = [&st](double s) {
                State y = st.dense(Real(s));
                return std::array<cdouble, 2>{to_cd(y[0]), to_cd(y[1])};
            };
            observer(v);
        }
        if (mag(y1) > Real(cfg.overflow_guard)) {
            tr.status = TrajStatus::BlowUp;
            blow_estimate(tb, y1, st.f_new());
            break;
        }
    }
    tr.t_final = static_cast<double>(st.t());
    tr.x1_final = to_cq(st.y()[0]);
    tr.x2_final = to_cq(st.y()[1]);
    tr.steps = st.naccept();
    tr.rejected = st.nreject();
    tr.evaluations = st.nfev();
    if (cfg.store_samples && cfg.sample_dt == 0 && !tr.samples.empty() &&
        tr.samples.back().t != tr.t_final)
        push_sample(st.t(), st.y());
    return tr;
}

// u' = kappa prod (u-u_a)^(1-mu_a) on the plain chart, and for v = 1/u
// v' = -kappa E prod (1-u_a v)^(1-mu_a), E = exp(2 pi i sum (1-mu_a) k_a)
template <class Real>
struct URhs {
    using C = std::complex<Real>;
    using State = std::array<C, 1>;
    std::vector<Real> mu, u, th_ref;
    C kappa, E;
    Real two_pi;
    bool vchart = false;

    Real cont_arg(const C& z, const Real& ref) const
    {
        Real a = carg(z);
        Real d = a - ref;
        d -= two_pi * rround(d / two_pi);
        return ref + d;
    }
    void operator()(const State& y, State& dy) const
    {
        if (!vchart) {
            Real lm = 0, ph = 0;
            for (size_t a = 0; a < mu.size(); ++a) {
                C z = y[0] - u[a];
                Real e = 1 - mu[a];
                lm += e * rlog(cabs(z));
                ph += e * cont_arg(z, th_ref[a]);
            }
            dy[0] = kappa * cexp(C(lm, ph));
        } else {
            C s(0);
            for (size_t a = 0; a < mu.size(); ++a)
                s += (1 - mu[a]) * clog(C(Real(1) - u[a] * y[0]));
            dy[0] = -kappa * E * cexp(s);
        }
    }
};

template <class Real>
Trajectory run_u(const BilliardSpec& spec, const InitialCondition& init, const IntegrationConfig& cfg)
{
    using C = std::complex<Real>;
    using State = std::array<C, 1>;
    const int r = spec.r;
    const int n = r + 1;
    const Real pi = pi_r<Real>(), two_pi = 2 * pi;
    URhs<Real> f;
    for (const auto& m : spec.mu)
        f.mu.push_back(from_number<Real>(m));
    for (const auto& x : spec.u)
        f.u.push_back(from_number<Real>(x));
    f.two_pi = two_pi;
    std::vector<double> ud = spec.u_d();
    C u0 = from_cquad<Real>(init.u0);
    for (int a = 0; a < n; ++a)
        if (u0 == C(f.u[a]))
            throw Error(ErrorCode::SingularInitial, "u0 coincides with a prevertex");
    const Real chi0 = from_quad<Real>(init.chi0);
    // kappa = (-1)^r e^{i (r-1) chi0}
    f.kappa = C(rcos(Real(r - 1) * chi0), rsin(Real(r - 1) * chi0)) * Real(r % 2 == 0 ? 1 : -1);
    const C phase0 = -C(rcos(chi0), rsin(chi0));
    f.th_ref.resize(n);
    for (int a = 0; a < n; ++a) {
        C z = u0 - f.u[a];
        // real u0 is read as u0 + i0
        f.th_ref[a] = (z.imag() == 0) ? (z.real() > 0 ? Real(0) : pi) : carg(z);
    }
    Real umax = 1;
    for (auto& x : f.u)
        umax = std::max(umax, rabs(x));
    const Real Usw = Real(4) * umax;

    std::vector<long long> k(n, 0);
    Real A = 0; // continuous arg of v in the chart
    auto rebuild = [&](const State& y, const URhs<Real>& ff) -> std::array<C, 2> {
        if (!ff.vchart) {
            C L(0);
            for (int a = 0; a < n; ++a) {
                C z = y[0] - ff.u[a];
                Real th = ff.cont_arg(z, ff.th_ref[a]);
                L += (-ff.mu[a] / Real(r - 1)) * C(rlog(cabs(z)), th);
            }
            C x2 = phase0 * cexp(L);
            return {y[0] * x2, x2};
        }
        C L(0);
        Real ks = 0;
        for (int a = 0; a < n; ++a) {
            L += (-ff.mu[a] / Real(r - 1)) * clog(C(Real(1) - ff.u[a] * y[0]));
            ks += ff.mu[a] * Real(k[a]);
        }
        L += C(0, -two_pi * ks / Real(r - 1));
        C x1 = phase0 * cexp(L);
        return {x1, y[0] * x1};
    };
    auto uval = [&](const State& y, bool vc) { return vc ? C(Real(1) / y[0]) : y[0]; };

    Real rtol = Real(cfg.rel_tol), atol = Real(cfg.abs_tol);
    if (rtol < Real(4) * machine_eps<Real>())
        rtol = Real(4) * machine_eps<Real>();
    Dop853<Real, 1, URhs<Real>> st(f, rtol, atol);
    const Real tend = Real(cfg.t_end);
    const int dir = tend >= 0 ? 1 : -1;
    Real hmax = cfg.max_step > 0 ? Real(cfg.max_step) : Real(1e30);
    st.init(Real(0), State{u0}, Real(0), dir, hmax);

    std::vector<Real> mu = f.mu, uu = f.u;
    Trajectory tr;
    tr.digits = effective_digits(cfg.precision_digits);
    auto push_sample = [&](const Real& t, const State& y, const URhs<Real>& ff) {
        auto x = rebuild(y, ff);
        Sample s;
        s.t = static_cast<double>(t);
        s.x1 = to_cd(x[0]);
        s.x2 = to_cd(x[1]);
        C uv = uval(y, ff.vchart);
        s.u = to_cd(uv);
        for (int a = 0; a <= r; ++a)
            if (s.near < 0 || cabs(C(uv - uu[a])) < std::abs(s.du)) {
                s.du = to_cd(C(uv - uu[a]));
                s.near = a;
            }
        s.dev = static_cast<double>(abs_C<Real>(mu, uu, r, x[0], x[1]) - 1);
        tr.max_dev = std::max(tr.max_dev, std::abs(s.dev));
        tr.samples.push_back(s);
    };
    if (cfg.store_samples)
        push_sample(Real(0), st.y(), st.rhs());
    // g = Im u in either chart (sign of -Im v agrees with Im u)
    auto gval = [](const State& y, bool vc) { return vc ? -y[0].imag() : y[0].imag(); };
    Real next_sample = cfg.sample_dt > 0 ? Real(dir * cfg.sample_dt) : Real(0);
    long steps = 0, rej = 0, nfev = 0;
    Real hlast = 0;
    tr.status = TrajStatus::Completed;
    for (;;) {
        if ((st.t() - tend) * Real(dir) >= 0)
            break;
        if (cfg.max_steps > 0 && steps >= cfg.max_steps) {
            tr.status = TrajStatus::ToleranceFailure;
            break;
        }
        Real hmin = std::max(Real(cfg.min_step), Real(16) * machine_eps<Real>() * rabs(st.t()));
        State yprev = st.y(), fprev = st.f_new();
        bool vc = st.rhs().vchart;
        auto res = st.step(tend, hmin);
        if (res != decltype(st)::StepStatus::Accepted) {
            C up = uval(yprev, vc);
            Real dmin = 1e30;
            int best = 0;
            for (int a = 0; a < n; ++a)
                if (cabs(C(up - uu[a])) < dmin) {
                    dmin = cabs(C(up - uu[a]));
                    best = a;
                }
            if (dmin < Real(cfg.corner_guard)) {
                tr.status = TrajStatus::BlowUp;
                tr.corner_index = best;
                tr.t_blowup = static_cast<double>(st.t());
            } else
                tr.status = TrajStatus::ToleranceFailure;
            break;
        }
        ++steps;
        const Real ta = st.t_old(), tb = st.t(), h = st.h_last();
        hlast = h;
        const State y1 = st.y();
        if (cfg.detect_events) {
            Real g0 = gval(yprev, vc), g1 = gval(y1, vc);
            Real dg0 = (vc ? -fprev[0].imag() : fprev[0].imag()) * h;
            Real dg1 = (vc ? -st.f_new()[0].imag() : st.f_new()[0].imag()) * h;
            auto gs = [&](const Real& s) { return gval(st.dense(s), vc); };
            auto br = find_brackets<Real>(g0, g1, dg0, dg1, gs);
            for (auto& b : br) {
                Real s = refine_root<Real>(b.first, b.second, gs);
                State ye = st.dense(s);
                CrossingEvent ev;
                ev.t = static_cast<double>(ta + s * h);
                C ue = uval(ye, vc);
                ev.u = static_cast<double>(ue.real());
                ev.direction = (gs(b.second) - gs(b.first)) * Real(dir) > 0 ? 1 : -1;
                ev.side = side_of(ud, ev.u);
                ev.pole = rabs(ue.real()) > Real(1) / Real(cfg.pole_eps);
                double dmin = INFINITY;
                for (double x : ud)
                    dmin = std::min(dmin, std::abs(ev.u - x));
                ev.near_corner = dmin < cfg.corner_guard;
                auto x = rebuild(ye, st.rhs());
                ev.x1 = to_cd(x[0]);
                ev.x2 = to_cd(x[1]);
                tr.events.push_back(ev);
            }
        }
        if (cfg.store_samples) {
            if (cfg.sample_dt > 0) {
                while ((next_sample - tb) * Real(dir) <= 0) {
                    push_sample(next_sample, st.dense((next_sample - ta) / h), st.rhs());
                    next_sample += Real(dir * cfg.sample_dt);
                }
            } else
                push_sample(tb, y1, st.rhs());
        }
        // advance branch references and switch charts between steps
        URhs<Real>& ff = st.rhs();
        bool switched = false;
        if (!ff.vchart) {
            for (int a = 0; a < n; ++a)
                ff.th_ref[a] = ff.cont_arg(C(y1[0] - ff.u[a]), ff.th_ref[a]);
            if (cabs(y1[0]) > Usw) {
                C v = Real(1) / y1[0];
                A = carg(v);
                Real ksum = 0;
                for (int a = 0; a < n; ++a) {
                    Real phi = carg(C(Real(1) - ff.u[a] * v));
                    k[a] = static_cast<long long>(rround((ff.th_ref[a] - phi + A) / two_pi));
                    ksum += (1 - ff.mu[a]) * Real(k[a]);
                }
                ff.E = C(rcos(two_pi * ksum), rsin(two_pi * ksum));
                ff.vchart = true;
                switched = true;
            }
        } else {
            A = ff.cont_arg(y1[0], A);
            if (cabs(y1[0]) * Usw < Real(2)) {
                for (int a = 0; a < n; ++a) {
                    Real phi = carg(C(Real(1) - ff.u[a] * y1[0]));
                    ff.th_ref[a] = phi - A + two_pi * Real(k[a]);
                }
                ff.vchart = false;
                switched = true;
            }
        }
        if (switched) {
            State ynew{ff.vchart ? C(Real(1) / y1[0]) : C(Real(1) / y1[0])};
            rej += st.nreject();
            nfev += st.nfev();
            Real tcur = tb;
            st.init(tcur, ynew, rabs(st.h_next()), dir, hmax);
        }
        // corner approach: u close to a prevertex with an accepted step
        C uc = uval(st.y(), st.rhs().vchart);
        for (int a = 0; a < n; ++a)
            if (cabs(C(uc - uu[a])) < Real(cfg.corner_guard) * Real(1e-3)) {
                tr.status = TrajStatus::BlowUp;
                tr.corner_index = a;
                tr.t_blowup = static_cast<double>(st.t());
            }
        if (tr.status == TrajStatus::BlowUp)
            break;
    }
    (void)hlast;
    auto xf = rebuild(st.y(), st.rhs());
    tr.t_final = static_cast<double>(st.t());
    tr.x1_final = to_cq(xf[0]);
    tr.x2_final = to_cq(xf[1]);
    tr.steps = steps;
    tr.rejected = rej + st.nreject();
    tr.evaluations = nfev + st.nfev();
    if (cfg.store_samples && cfg.sample_dt == 0 && !tr.samples.empty() && tr.samples.back().t != tr.t_final)
        push_sample(st.t(), st.y(), st.rhs());
    return tr;
}

} // namespace

Trajectory integrate(const BilliardSpec& spec, const InitialCondition& init, const IntegrationConfig& cfg,
                     const StepObserver& observer)
{
    cfg.validate();
    ODESystem sys = build_system(spec);
    switch (effective_digits(cfg.precision_digits)) {
    case 15: return run_direct<double>(sys, spec, init, cfg, observer);
    case 18: return run_direct<long double>(sys, spec, init, cfg, observer);
    default: return run_direct<quad>(sys, spec, init, cfg, observer);
    }
}

Trajectory integrate(const ODESystem& sys, const InitialCondition& init, const IntegrationConfig& cfg,
                     const StepObserver& observer)
{
    cfg.validate();
    BilliardSpec spec = recover_spec(sys);
    switch (effective_digits(cfg.precision_digits)) {
    case 15: return run_direct<double>(sys, spec, init, cfg, observer);
    case 18: return run_direct<long double>(sys, spec, init, cfg, observer);
    default: return run_direct<quad>(sys, spec, init, cfg, observer);
    }
}

Trajectory integrate_u(const BilliardSpec& spec, const InitialCondition& init, const IntegrationConfig& cfg)
{
    cfg.validate();
    switch (effective_digits(cfg.precision_digits)) {
    case 15: return run_u<double>(spec, init, cfg);
    case 18: return run_u<long double>(spec, init, cfg);
    default: return run_u<quad>(spec, init, cfg);
    }
}

std::vector<CrossingEvent> detect_crossings(const Trajectory& traj)
{
    std::vector<CrossingEvent> ev = traj.events;
    std::stable_sort(ev.begin(), ev.end(), [](const CrossingEvent& a, const CrossingEvent& b) { return a.t < b.t; });
    return ev;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::string& header)
{
    if (!header.empty())
        os << header;
    os << "t,re_x1,im_x1,re_x2,im_x2,re_u,im_u,absC\n";
    os << std::setprecision(17);
    for (const auto& s : traj.samples)
        os << s.t << ',' << s.x1.real() << ',' << s.x1.imag() << ',' << s.x2.real() << ',' << s.x2.imag() << ','
           << s.u.real() << ',' << s.u.imag() << ',' << 1.0 + s.dev << '\n';
}

void write_events_csv(std::ostream& os, const std::vector<CrossingEvent>& events, const std::string& header)
{
    if (!header.empty())
        os << header;
    os << "t,u,direction,side,pole,near_corner,re_x2,im_x2,chi_before,chi_after\n";
    os << std::setprecision(17);
    for (const auto& e : events)
        os << e.t << ',' << e.u << ',' << e.direction << ',' << e.side << ',' << (e.pole ? 1 : 0) << ','
           << (e.near_corner ? 1 : 0) << ',' << e.x2.real() << ',' << e.x2.imag() << ',' << e.chi_before << ','
           << e.chi_after << '\n';
}

} // namespace scb
