#include "scb/poly.hpp"
#include "scb/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace scb {

Polynomial::Polynomial(std::vector<Number> coeffs) : c_(std::move(coeffs))
{
    trim();
}

void Polynomial::trim()
{
    while (!c_.empty() && c_.back().is_zero())
        c_.pop_back();
}

bool Polynomial::exact() const
{
    return std::all_of(c_.begin(), c_.end(), [](const Number& x) { return x.exact(); });
}

bool Polynomial::monic() const
{
    return !c_.empty() && c_.back().exact() && c_.back().rational() == 1;
}

Number Polynomial::leading() const
{
    return c_.empty() ? Number(0) : c_.back();
}

Number Polynomial::coeff(int k) const
{
    if (k < 0 || k >= static_cast<int>(c_.size()))
        return Number(0);
    return c_[k];
}

Number Polynomial::eval(const Number& x) const
{
    Number acc(0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it)
        acc = acc * x + *it;
    return acc;
}

cquad Polynomial::eval(const cquad& z) const
{
    cquad acc(0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it)
        acc = acc * z + cquad(it->value());
    return acc;
}

cdouble Polynomial::eval(const cdouble& z) const
{
    cdouble acc(0);
    for (auto it = c_.rbegin(); it != c_.rend(); ++it)
        acc = acc * z + it->to_double();
    return acc;
}

Polynomial Polynomial::derivative() const
{
    std::vector<Number> d;
    for (size_t k = 1; k < c_.size(); ++k)
        d.push_back(Number(static_cast<long long>(k)) * c_[k]);
    return Polynomial(d);
}

Polynomial Polynomial::operator-() const
{
    std::vector<Number> d(c_.size());
    for (size_t k = 0; k < c_.size(); ++k)
        d[k] = -c_[k];
    return Polynomial(d);
}

Polynomial operator+(const Polynomial& a, const Polynomial& b)
{
    size_t n = std::max(a.c_.size(), b.c_.size());
    std::vector<Number> d(n);
    for (size_t k = 0; k < n; ++k)
        d[k] = a.coeff(static_cast<int>(k)) + b.coeff(static_cast<int>(k));
    return Polynomial(d);
}

Polynomial operator-(const Polynomial& a, const Polynomial& b)
{
    return a + (-b);
}

Polynomial operator*(const Polynomial& a, const Polynomial& b)
{
    if (a.c_.empty() || b.c_.empty())
        return Polynomial();
    std::vector<Number> d(a.c_.size() + b.c_.size() - 1);
    for (size_t i = 0; i < a.c_.size(); ++i)
        for (size_t j = 0; j < b.c_.size(); ++j)
            d[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(d);
}

Polynomial operator*(const Number& s, const Polynomial& p)
{
    std::vector<Number> d(p.c_.size());
    for (size_t k = 0; k < d.size(); ++k)
        d[k] = s * p.c_[k];
    return Polynomial(d);
}

bool operator==(const Polynomial& a, const Polynomial& b)
{
    if (a.c_.size() != b.c_.size())
        return false;
    for (size_t k = 0; k < a.c_.size(); ++k)
        if (!(a.c_[k] == b.c_[k]))
            return false;
    return true;
}

Polynomial Polynomial::shift_up() const
{
    if (c_.empty())
        return *this;
    std::vector<Number> d;
    d.reserve(c_.size() + 1);
    d.push_back(Number(0));
    d.insert(d.end(), c_.begin(), c_.end());
    return Polynomial(d);
}

std::string Polynomial::str(const std::string& var) const
{
    if (c_.empty())
        return "0";
    std::ostringstream os;
    bool first = true;
    for (int k = degree(); k >= 0; --k) {
        const Number& a = c_[k];
        if (a.is_zero())
            continue;
        bool neg = a < Number(0);
        Number m = neg ? -a : a;
        if (first)
            os << (neg ? "-" : "");
        else
            os << (neg ? " - " : " + ");
        bool unit = m.exact() && m.rational() == 1;
        if (!unit || k == 0)
            os << m.str();
        if (k > 0) {
            if (!unit)
                os << "*";
            os << var;
            if (k > 1)
                os << "^" << k;
        }
        first = false;
    }
    return os.str();
}

namespace {

// roots must be pairwise distinct: exactly for rationals, by a relative gap otherwise
void check_distinct(const std::vector<Number>& roots)
{
    if (roots.size() < 2)
        return;
    quad lo = roots[0].value(), hi = lo, mag = 0;
    for (const auto& x : roots) {
        lo = std::min(lo, x.value());
        hi = std::max(hi, x.value());
        mag = std::max(mag, quad(boost::multiprecision::abs(x.value())));
    }
    quad span = std::max(hi - lo, mag);
    for (size_t i = 0; i < roots.size(); ++i)
        for (size_t j = i + 1; j < roots.size(); ++j) {
            bool same;
            if (roots[i].exact() && roots[j].exact())
                same = roots[i].rational() == roots[j].rational();
            else
                same = boost::multiprecision::abs(roots[i].value() - roots[j].value()) <= quad(1e-12) * span;
            if (same)
                throw Error(ErrorCode::DuplicateRoot, "roots " + roots[i].str() + " and " + roots[j].str() + " coincide");
        }
}

} // namespace

Polynomial poly_from_roots(const std::vector<Number>& roots)
{
    check_distinct(roots);
    Polynomial p(std::vector<Number>{Number(1)});
    for (const auto& a : roots)
        p = p * Polynomial(std::vector<Number>{-a, Number(1)});
    return p;
}

std::vector<Number> partial_fraction_weights(const Polynomial& Q, const std::vector<Number>& roots, int r)
{
    Polynomial S = poly_from_roots(roots);
    Polynomial dS = S.derivative();
    std::vector<Number> mu;
    mu.reserve(roots.size());
    for (const auto& a : roots) {
        Number d = dS.eval(a);
        if (d.is_zero() || (!d.exact() && boost::multiprecision::abs(d.value()) < quad(1e-30)))
            throw Error(ErrorCode::DegenerateResidue, "S'(" + a.str() + ") vanishes");
        mu.push_back(Number(r - 1) * Q.eval(a) / d);
    }
    return mu;
}

std::vector<cquad> complex_roots(const Polynomial& p)
{
    int n = p.degree();
    if (p.is_zero())
        throw Error(ErrorCode::InvalidInput, "roots of the zero polynomial");
    std::vector<cquad> out;
    if (n == 0)
        return out;
    std::vector<cquad> c(n + 1);
    for (int k = 0; k <= n; ++k)
        c[k] = cquad(p.coeff(k).value()) / cquad(p.leading().value());
    auto ev = [&](const cquad& z, cquad& dz) {
        cquad v = c[n];
        dz = cquad(0);
        for (int k = n - 1; k >= 0; --k) {
            dz = dz * z + v;
            v = v * z + c[k];
        }
        return v;
    };
    // Cauchy bound for the initial circle
    quad R = 0;
    for (int k = 0; k < n; ++k)
        R = std::max(R, quad(abs(c[k])));
    R = 1 + R;
    std::vector<cquad> z(n);
    const quad pi = boost::multiprecision::acos(quad(-1));
    for (int k = 0; k < n; ++k) {
        quad th = 2 * pi * k / n + quad(0.4);
        z[k] = cquad(R * quad(0.5) * cos(th), R * quad(0.5) * sin(th));
    }
    for (int it = 0; it < 500; ++it) {
        quad maxcorr = 0;
        for (int k = 0; k < n; ++k) {
            cquad d;
            cquad v = ev(z[k], d);
            if (v == cquad(0))
                continue;
            cquad ratio = v / d;
            cquad s(0);
            for (int j = 0; j < n; ++j)
                if (j != k)
                    s += cquad(1) / (z[k] - z[j]);
            cquad w = ratio / (cquad(1) - ratio * s);
            z[k] -= w;
            maxcorr = std::max(maxcorr, quad(abs(w)) / (1 + quad(abs(z[k]))));
        }
        if (maxcorr < quad(1e-32))
            break;
    }
    for (auto& x : z) {
        for (int it = 0; it < 3; ++it) {
            cquad d;
            cquad v = ev(x, d);
            if (d == cquad(0))
                break;
            x -= v / d;
        }
    }
    std::sort(z.begin(), z.end(), [](const cquad& a, const cquad& b) { return a.real() < b.real(); });
    return z;
}

} // namespace scb
