#include "scb/sc_map.hpp"
#include "scb/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace scb {

namespace {

const double kPi = 3.14159265358979323846;
constexpr int kNodes = 20;

double seg_dist(const cdouble& p, const cdouble& a, const cdouble& b)
{
    cdouble d = b - a;
    double L2 = std::norm(d);
    if (L2 == 0)
        return std::abs(p - a);
    double s = std::clamp(((p - a) * std::conj(d)).real() / L2, 0.0, 1.0);
    return std::abs(p - (a + s * d));
}

} // namespace

double arg_plus(const cdouble& z)
{
    if (z.imag() == 0)
        return z.real() < 0 ? kPi : 0.0;
    return std::atan2(z.imag(), z.real());
}

QuadRule gauss_jacobi(int n, double alpha, double beta)
{
    if (n < 1 || !(alpha > -1) || !(beta > -1))
        throw Error(ErrorCode::InvalidParameter, "Gauss-Jacobi needs n >= 1 and exponents above -1");
    // Golub-Welsch on the Jacobi matrix of the orthonormal recurrence
    Eigen::VectorXd diag(n), sub(std::max(n - 1, 1));
    double ab = alpha + beta;
    for (int k = 0; k < n; ++k) {
        if (k == 0)
            diag[k] = (beta - alpha) / (ab + 2);
        else
            diag[k] = (beta * beta - alpha * alpha) / ((2 * k + ab) * (2 * k + ab + 2));
    }
    for (int k = 1; k < n; ++k) {
        double num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
        double den = (2 * k + ab) * (2 * k + ab) * (2 * k + ab + 1) * (2 * k + ab - 1);
        sub[k - 1] = std::sqrt(num / den);
    }
    double mu0 = std::exp((ab + 1) * std::log(2.0) + std::lgamma(alpha + 1) + std::lgamma(beta + 1) -
                          std::lgamma(ab + 2));
    QuadRule q;
    q.x.resize(n);
    q.w.resize(n);
    if (n == 1) {
        q.x[0] = diag[0];
        q.w[0] = mu0;
        return q;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
    for (int k = 0; k < n; ++k) {
        q.x[k] = es.eigenvalues()[k];
        double v0 = es.eigenvectors()(0, k);
        q.w[k] = mu0 * v0 * v0;
    }
    return q;
}

std::pair<cdouble, cdouble> Polygon::side(int a) const
{
    int n = sides();
    int b = (a + 1) % n;
    return {vertices[a], vertices[b]};
}

std::vector<double> Polygon::measured_angles() const
{
    int n = sides();
    std::vector<double> out(n, std::nan(""));
    for (int a = 0; a < n; ++a) {
        if (at_infinity[a])
            continue;
        int p = (a + n - 1) % n, s = (a + 1) % n;
        cdouble din = at_infinity[p] ? std::polar(1.0, side_dir[p]) : vertices[a] - vertices[p];
        cdouble dout = at_infinity[s] ? std::polar(1.0, side_dir[a]) : vertices[s] - vertices[a];
        out[a] = kPi - std::arg(dout / din);
    }
    return out;
}

bool Polygon::contains(const cdouble& w, double tol) const
{
    if (!bounded)
        return true;
    int n = sides();
    for (int a = 0; a < n; ++a) {
        auto [p, q] = side(a);
        if (seg_dist(w, p, q) <= tol)
            return true;
    }
    // winding number of the counterclockwise boundary
    double wsum = 0;
    for (int a = 0; a < n; ++a) {
        auto [p, q] = side(a);
        wsum += std::arg((q - w) / (p - w));
    }
    return std::abs(wsum) > kPi;
}

double Polygon::perimeter() const
{
    double s = 0;
    for (int a = 0; a < sides(); ++a) {
        auto [p, q] = side(a);
        s += std::abs(q - p);
    }
    return s;
}

nlohmann::json Polygon::to_json() const
{
    nlohmann::json j;
    j["vertices"] = nlohmann::json::array();
    for (int a = 0; a < sides(); ++a) {
        if (at_infinity[a])
            j["vertices"].push_back(nullptr);
        else
            j["vertices"].push_back({vertices[a].real(), vertices[a].imag()});
    }
    j["angles"] = angles;
    j["bounded"] = bounded;
    j["phi_inf"] = {phi_inf.real(), phi_inf.imag()};
    j["side_directions"] = side_dir;
    return j;
}

ScMap::ScMap(const BilliardSpec& spec, cdouble base) : spec_(spec), base_(base)
{
    spec_.validate();
    if (base.imag() < 0)
        throw Error(ErrorCode::InvalidInput, "base point must lie in the closed upper half plane");
    n_ = spec_.r + 1;
    mu_ = spec_.mu_d();
    u_ = spec_.u_d();
    for (double m : mu_)
        e_.push_back(m - 1);
    U_ = 1;
    for (double x : u_)
        U_ = std::max(U_, std::abs(x));
    R_ = 4 * U_;
    double c = 0.5 * (u_.front() + u_.back());
    double hs = std::max(1.0, 0.5 * (u_.back() - u_.front()));
    ref_ = cdouble(c, hs);
    leg_ = gauss_jacobi(kNodes, 0, 0);
    for (int a = 0; a < n_; ++a)
        jac_.push_back(mu_[a] > 0 ? gauss_jacobi(kNodes, e_[a], 0) : QuadRule{});

    // Phi_inf relative to u_ref, via the straight path up to iR and the 1/u tail
    cdouble uR(0, R_);
    F_inf_ = panel(ref_, uR, -1, -1, 0) + tail(1.0 / uR);
    for (int a = 0; a < n_; ++a)
        if (base == cdouble(u_[a]) && mu_[a] <= 0)
            throw Error(ErrorCode::DivergentIntegral, "base point at a prevertex with mu <= 0");
    F_base_ = F(base);

    poly_.base_point = base;
    poly_.bounded = spec_.bounded();
    poly_.phi_inf = F_inf_ - F_base_;
    for (int a = 0; a < n_; ++a) {
        poly_.angles.push_back(mu_[a] * kPi);
        if (mu_[a] > 0) {
            poly_.vertices.push_back(F(cdouble(u_[a])) - F_base_);
            poly_.at_infinity.push_back(false);
        } else {
            poly_.vertices.push_back(cdouble(std::nan(""), std::nan("")));
            poly_.at_infinity.push_back(true);
        }
    }
    for (int a = 0; a < n_; ++a) {
        double th = 0;
        for (int b = a + 1; b < n_ && a < n_ - 1; ++b)
            th += kPi * e_[b];
        poly_.side_dir.push_back(a == n_ - 1 ? 0.0 : th);
    }
    for (int a = 0; a < n_; ++a)
        poly_.side_points.push_back(a + 1 < n_ ? F(cdouble(0.5 * (u_[a] + u_[a + 1]))) - F_base_ : poly_.phi_inf);
    std::vector<cdouble> pts;
    for (int a = 0; a < n_; ++a)
        if (!poly_.at_infinity[a])
            pts.push_back(poly_.vertices[a]);
    pts.push_back(poly_.phi_inf);
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            poly_.diameter = std::max(poly_.diameter, std::abs(pts[i] - pts[j]));
}

cdouble ScMap::derivative(const cdouble& u) const
{
    if (u.imag() < 0)
        throw Error(ErrorCode::InvalidInput, "derivative requested in the lower half plane");
    double lm = 0, ph = 0;
    for (int a = 0; a < n_; ++a) {
        cdouble z = u - u_[a];
        if (z == cdouble(0)) {
            if (e_[a] < 0)
                throw Error(ErrorCode::SingularPoint, "Phi' is singular at a prevertex");
            if (e_[a] > 0)
                return 0;
            continue;
        }
        lm += e_[a] * std::log(std::abs(z));
        ph += e_[a] * arg_plus(z);
    }
    return std::polar(std::exp(lm), ph);
}

cdouble ScMap::G(const cdouble& s) const
{
    cdouble acc(0);
    for (int a = 0; a < n_; ++a)
        acc += e_[a] * std::log(1.0 - u_[a] * s);
    return std::exp(acc);
}

cdouble ScMap::tail(const cdouble& v) const
{
    cdouble acc(0);
    for (int k = 0; k < kNodes; ++k)
        acc += leg_.w[k] * G(0.5 * v * (1 + leg_.x[k]));
    return 0.5 * v * acc;
}

cdouble ScMap::panel(const cdouble& a, const cdouble& b, int sa, int sb, int depth) const
{
    double L = std::abs(b - a);
    if (L == 0)
        return 0;
    bool split = sa >= 0 && sb >= 0;
    if (!split && depth < 80)
        for (int p = 0; p < n_; ++p) {
            if (p == sa || p == sb)
                continue;
            if (seg_dist(cdouble(u_[p]), a, b) < 0.5 * L) {
                split = true;
                break;
            }
        }
    if (split && depth < 80) {
        cdouble m = 0.5 * (a + b);
        return panel(a, m, sa, -1, depth + 1) + panel(m, b, -1, sb, depth + 1);
    }
    cdouble m = 0.5 * (a + b), h = 0.5 * (b - a);
    cdouble acc(0);
    if (sb >= 0 || sa >= 0) {
        int s = sb >= 0 ? sb : sa;
        const QuadRule& J = jac_[s];
        // (u - u_s) = -h (1 - x) at the b end, h (1 + y) at the a end
        cdouble hs = sb >= 0 ? -h : h;
        cdouble pref = std::polar(std::pow(std::abs(hs), e_[s]), e_[s] * arg_plus(hs));
        for (int k = 0; k < kNodes; ++k) {
            double y = sb >= 0 ? J.x[k] : -J.x[k];
            cdouble u = m + h * y;
            double lm = 0, ph = 0;
            for (int c = 0; c < n_; ++c) {
                if (c == s)
                    continue;
                cdouble z = u - u_[c];
                lm += e_[c] * std::log(std::abs(z));
                ph += e_[c] * arg_plus(z);
            }
            acc += J.w[k] * std::polar(std::exp(lm), ph);
        }
        return h * pref * acc;
    }
    for (int k = 0; k < kNodes; ++k)
        acc += leg_.w[k] * derivative(m + h * leg_.x[k]);
    return h * acc;
}

cdouble ScMap::segment_integral(const cdouble& a, const cdouble& b, int sa, int sb) const
{
    return panel(a, b, sa, sb, 0);
}

cdouble ScMap::F(const cdouble& u) const
{
    if (u.imag() < 0)
        throw Error(ErrorCode::InvalidInput, "Phi evaluated in the lower half plane");
    if (std::abs(u) > R_)
        return F_inf_ - tail(1.0 / u);
    int s = -1;
    for (int a = 0; a < n_; ++a)
        if (u == cdouble(u_[a])) {
            if (mu_[a] <= 0)
                throw Error(ErrorCode::DivergentIntegral, "Phi diverges at a prevertex with mu <= 0");
            s = a;
        }
    return panel(ref_, u, -1, s, 0);
}

cdouble ScMap::eval(const cdouble& u) const
{
    return F(u) - F_base_;
}

void ScMap::build_grid() const
{
    std::call_once(grid_->once, [this] {
        auto& pts = grid_->pts;
        const int M = 64;
        for (int j = 0; j < M; ++j) {
            double rho = 1 - std::pow(10.0, -3.0 * (j + 0.5) / M);
            for (int k = 0; k < M; ++k) {
                cdouble z = std::polar(rho, 2 * kPi * (k + 0.5) / M);
                cdouble u = cdouble(0, 1) * (1.0 + z) / (1.0 - z);
                if (u.imag() <= 0)
                    continue;
                pts.emplace_back(u, eval(u));
            }
        }
        // corner approaches and points hugging each interval
        for (int a = 0; a < n_; ++a) {
            if (mu_[a] <= 0)
                continue;
            for (int m = 1; m <= 10; ++m)
                for (int k = 0; k < 8; ++k) {
                    cdouble u = u_[a] + std::polar(std::pow(10.0, -m), kPi * (k + 0.5) / 8);
                    pts.emplace_back(u, eval(u));
                }
        }
        for (int a = 0; a + 1 < n_; ++a)
            for (int k = 1; k < 32; ++k) {
                double x = u_[a] + (u_[a + 1] - u_[a]) * k / 32.0;
                for (double y : {1e-3, 1e-5}) {
                    cdouble u(x, y * (u_[a + 1] - u_[a]));
                    pts.emplace_back(u, eval(u));
                }
            }
    });
}

bool ScMap::inverse_from(const cdouble& w, cdouble& u, int max_iter) const
{
    const double tol = 1e-13 * std::max(1.0, poly_.diameter);
    auto resid = [&](const cdouble& x) { return eval(x) - w; };
    cdouble r = resid(u);
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(r) < tol)
            return true;
        bool vchart = std::abs(u) > R_;
        cdouble step;
        if (vchart) {
            cdouble v = 1.0 / u;
            // Phi = Phi_inf - int_0^v G, so dPhi/dv = -G(v)
            step = r / (-G(v));
            cdouble lam = 1;
            bool ok = false;
            for (int h = 0; h < 50; ++h) {
                cdouble vn = v - lam * step;
                if (vn.imag() > 0 && h < 20) {
                    lam *= 0.5;
                    continue;
                }
                if (vn.imag() > 0)
                    vn.imag(0);
                if (vn == cdouble(0)) {
                    lam *= 0.5;
                    continue;
                }
                cdouble un = 1.0 / vn;
                cdouble rn = resid(un);
                if (std::abs(rn) < std::abs(r)) {
                    u = un;
                    r = rn;
                    ok = true;
                    break;
                }
                lam *= 0.5;
            }
            if (!ok)
                return std::abs(r) < 1e3 * tol;
            continue;
        }
        cdouble d;
        try {
            d = derivative(u);
        } catch (const Error&) {
            return false;
        }
        if (d == cdouble(0))
            return false;
        step = r / d;
        double lam = 1;
        bool ok = false;
        for (int h = 0; h < 50; ++h) {
            cdouble un = u - lam * step;
            if (un.imag() < 0 && h < 20) {
                lam *= 0.5;
                continue;
            }
            if (un.imag() < 0)
                un.imag(0);
            cdouble rn;
            try {
                rn = resid(un);
            } catch (const Error&) {
                lam *= 0.5;
                continue;
            }
            if (std::abs(rn) < std::abs(r)) {
                u = un;
                r = rn;
                ok = true;
                break;
            }
            lam *= 0.5;
        }
        if (!ok)
            return std::abs(r) < 1e3 * tol;
    }
    return std::abs(r) < 1e3 * tol;
}

cdouble ScMap::inverse(const cdouble& w) const
{
    if (poly_.bounded && !poly_.contains(w, 1e-12 * poly_.diameter))
        throw Error(ErrorCode::OutsidePolygon, "point lies outside the polygon");
    if (w == cdouble(0))
        return base_;
    build_grid();
    // try seeds in order of image distance
    const auto& pts = grid_->pts;
    std::vector<std::pair<double, int>> order;
    order.reserve(pts.size());
    for (int k = 0; k < static_cast<int>(pts.size()); ++k)
        order.emplace_back(std::abs(pts[k].second - w), k);
    int tries = std::min<int>(8, static_cast<int>(order.size()));
    std::partial_sort(order.begin(), order.begin() + tries, order.end());
    for (int t = 0; t < tries; ++t) {
        cdouble u = pts[order[t].second].first;
        if (inverse_from(w, u))
            return u;
    }
    cdouble seed = pts[order[0].second].first;
    throw Error(ErrorCode::NoConvergence, "Newton inverse failed; nearest seed u = (" + std::to_string(seed.real()) +
                                              ", " + std::to_string(seed.imag()) + ")");
}

cdouble sc_derivative(const BilliardSpec& spec, const cdouble& u)
{
    return ScMap(spec).derivative(u);
}

cdouble sc_eval(const BilliardSpec& spec, const cdouble& u, cdouble base)
{
    return ScMap(spec, base).eval(u);
}

Polygon vertices(const BilliardSpec& spec, cdouble base)
{
    return ScMap(spec, base).polygon();
}

cdouble phi_infinity(const BilliardSpec& spec, cdouble base)
{
    return ScMap(spec, base).phi_inf();
}

cdouble sc_inverse(const ScMap& map, const cdouble& w)
{
    return map.inverse(w);
}

} // namespace scb
