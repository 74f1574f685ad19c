#include "scb/correspondence.hpp"
#include "scb/dop853.hpp"
#include "scb/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scb {

namespace {

const double kPi = 3.14159265358979323846;

cdouble to_cdq(const cquad& z) { return {static_cast<double>(z.real()), static_cast<double>(z.imag())}; }

// du/dt = x2^(r-1) (P(u) - u Q(u)) from the explicit system
cdouble u_velocity(const ODESystem& sys, const cdouble& x1, const cdouble& x2)
{
    cdouble P = 0, Q = 0;
    for (int j = 0; j <= sys.r; ++j) {
        cdouble m = std::pow(x1, j) * std::pow(x2, sys.r - j);
        if (j < static_cast<int>(sys.p.size()))
            P += sys.p[j].to_double() * m;
        if (j < static_cast<int>(sys.q.size()))
            Q += sys.q[j].to_double() * m;
    }
    return (P * x2 - x1 * Q) / (x2 * x2);
}

cdouble fold_u(const cdouble& u, bool lower) { return lower ? std::conj(u) : u; }

// position of w along side r relative to Phi_inf: true for the part u > u_r
bool beyond_last(const Table& table, const ScMap& map, const cdouble& hit)
{
    const Edge& e = table.edges().back();
    double s_hit = ((hit - e.p0) * std::conj(e.d)).real();
    double s_inf = ((map.phi_inf() - e.p0) * std::conj(e.d)).real();
    return s_hit < s_inf;
}

} // namespace

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    LineFit f;
    size_t n = std::min(x.size(), y.size());
    if (n < 2)
        return f;
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0)
        return f;
    f.b = sxy / sxx;
    f.a = my - f.b * mx;
    double ssr = 0;
    for (size_t i = 0; i < n; ++i) {
        double e = y[i] - f.a - f.b * x[i];
        ssr += e * e;
    }
    f.r2 = syy > 0 ? 1 - ssr / syy : 1;
    f.err_b = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0;
    return f;
}

Launch billiard_launch(const ScMap& map, const InitialCondition& init)
{
    const BilliardSpec& spec = map.spec();
    ODESystem sys = build_system(spec);
    cdouble u0 = to_cdq(init.u0);
    cdouble x1 = to_cdq(init.x1), x2 = to_cdq(init.x2);
    Launch L;
    L.udot0 = u_velocity(sys, x1, x2);
    if (u0.imag() < 0)
        L.lower = true;
    else if (u0.imag() == 0)
        L.lower = L.udot0.imag() < 0;
    cdouble uf = fold_u(u0, L.lower);
    if (uf.imag() == 0) {
        uf = cdouble(uf.real(), 0);
        L.start_side = side_of(spec.u_d(), uf.real());
    }
    L.w0 = map.eval(uf);
    L.chi = wrap_angle(std::arg(map.derivative(uf) * fold_u(L.udot0, L.lower)));
    return L;
}

ImageOrbit image_orbit(const ScMap& map, const Trajectory& traj, const InitialCondition& init)
{
    if (traj.status == TrajStatus::BlowUp)
        throw Error(ErrorCode::CornerEncounter, "trajectory ends in a corner blow-up");
    if (traj.samples.empty())
        throw Error(ErrorCode::InvalidInput, "image_orbit needs stored samples");
    ImageOrbit img;
    img.launch = billiard_launch(map, init);
    const Launch& L = img.launch;
    Table table(map.polygon());
    double D = table.diameter();

    for (size_t k = 0; k < traj.samples.size(); ++k) {
        const Sample& s = traj.samples[k];
        if (!std::isfinite(s.u.real()) || !std::isfinite(s.u.imag()))
            continue;
        bool lower = s.u.imag() < 0 || (s.u.imag() == 0 && k == 0 && L.lower);
        img.t.push_back(s.t);
        img.w.push_back(map.eval(fold_u(s.u, lower)));
        img.lower.push_back(lower);
    }

    img.events = detect_crossings(traj);
    auto& B = img.bounces;
    B.start = L.w0;
    B.chi0 = L.chi;
    B.start_side = L.start_side;
    for (size_t k = 0; k < img.events.size(); ++k) {
        const CrossingEvent& ev = img.events[k];
        Bounce b;
        b.n = static_cast<long>(k + 1);
        b.tau = ev.t;
        b.side = ev.side;
        b.hit = map.eval(cdouble(ev.u, 0));
        B.bounces.push_back(b);
    }
    // segment directions: chord between consecutive hits
    size_t nb = B.bounces.size();
    std::vector<double> seg_chi(nb + 1);
    seg_chi[0] = L.chi;
    for (size_t k = 0; k < nb; ++k) {
        cdouble a = B.bounces[k].hit;
        double chi;
        if (k + 1 < nb)
            chi = std::arg(B.bounces[k + 1].hit - a);
        else if (std::abs(img.w.back() - a) > 1e-6 * D && img.t.back() > B.bounces[k].tau)
            chi = std::arg(img.w.back() - a);
        else
            chi = 2 * table.side_angle(B.bounces[k].side) - seg_chi[k];
        seg_chi[k + 1] = wrap_angle(chi);
        B.bounces[k].chi = seg_chi[k + 1];
        img.events[k].chi_before = seg_chi[k];
        img.events[k].chi_after = seg_chi[k + 1];
        img.reflection = std::max(img.reflection, angle_dist(seg_chi[k] + seg_chi[k + 1],
                                                             2 * table.side_angle(B.bounces[k].side)));
    }
    if (nb > 0)
        seg_chi[0] = wrap_angle(std::arg(B.bounces[0].hit - L.w0));

    // residuals per segment
    size_t seg = 0;
    for (size_t k = 0; k < img.t.size(); ++k) {
        double t = img.t[k];
        while (seg < nb && t > B.bounces[seg].tau)
            ++seg;
        bool at_bounce = seg < nb && t == B.bounces[seg].tau;
        if (at_bounce)
            continue;
        cdouble a = seg == 0 ? L.w0 : B.bounces[seg - 1].hit;
        cdouble e = std::polar(1.0, seg_chi[seg]);
        cdouble rel = (img.w[k] - a) * std::conj(e);
        img.straightness = std::max(img.straightness, std::abs(rel.imag()));
        if (seg == 0)
            img.first_segment = std::max(img.first_segment, std::abs(img.w[k] - L.w0 - std::polar(1.0, L.chi) * t));
        if (k + 1 < img.t.size()) {
            double dt = img.t[k + 1] - t;
            bool same = seg >= nb || img.t[k + 1] < B.bounces[seg].tau;
            if (same && dt >= 1e-3)
                img.speed = std::max(img.speed, std::abs(std::abs(img.w[k + 1] - img.w[k]) / dt - 1));
        }
    }
    for (size_t k = 0; k + 1 < nb; ++k) {
        double dt = B.bounces[k + 1].tau - B.bounces[k].tau;
        if (dt >= 1e-3)
            img.speed = std::max(img.speed, std::abs(std::abs(B.bounces[k + 1].hit - B.bounces[k].hit) / dt - 1));
    }
    if (nb > 0 && B.bounces[0].tau >= 1e-3)
        img.speed = std::max(img.speed, std::abs(std::abs(B.bounces[0].hit - L.w0) / B.bounces[0].tau - 1));
    B.t_end = traj.t_final;
    B.final_pos = img.w.back();
    B.final_chi = seg_chi[nb];
    return img;
}

BounceComparison compare_bounces(const BounceSequence& a, const BounceSequence& b, double t_limit)
{
    BounceComparison c;
    auto count = [&](const BounceSequence& s) {
        long n = 0;
        for (const auto& x : s.bounces)
            if (x.tau < t_limit)
                ++n;
        return n;
    };
    long na = count(a), nb = count(b);
    c.count_match = na == nb;
    c.compared = std::min(na, nb);
    for (long k = 0; k < c.compared; ++k) {
        const Bounce &x = a.bounces[k], &y = b.bounces[k];
        if (x.side != y.side)
            c.sides_match = false;
        c.max_dtau = std::max(c.max_dtau, std::abs(x.tau - y.tau));
        c.max_dchi = std::max(c.max_dchi, angle_dist(x.chi, y.chi));
    }
    return c;
}

BounceSequence trace_from_launch(const ScMap& map, const Table& table, const InitialCondition& init, double t_max,
                                 long max_bounces)
{
    Launch L = billiard_launch(map, init);
    TraceOptions o;
    o.t_max = t_max;
    o.max_bounces = max_bounces;
    o.start_side = L.start_side;
    return trace(table, L.w0, L.chi, o);
}

std::vector<ReconstructedState> ode_from_billiard(const ScMap& map, const Table& table, const InitialCondition& init,
                                                  const BounceSequence& seq, const std::vector<double>& times)
{
    const BilliardSpec& spec = map.spec();
    const int r = spec.r;
    std::vector<double> mu = spec.mu_d(), uu = spec.u_d();
    Launch L = billiard_launch(map, init);
    cdouble C = to_cdq(conserved_C(spec, init.x1, init.x2));
    cdouble u0 = to_cdq(init.u0);

    std::vector<int> k(r + 1, 0);
    bool lower = false;
    // one crossing of the real axis at x, from the current half plane
    auto cross = [&](double x, bool beyond) {
        for (int a = 0; a <= r; ++a) {
            bool left = beyond ? false : (x < uu[a]);
            if (left)
                k[a] += lower ? -1 : 1;
        }
        lower = !lower;
    };
    if (L.lower && u0.imag() == 0)
        cross(u0.real(), false);
    else
        lower = L.lower;
    std::vector<size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return times[a] < times[b]; });

    std::vector<ReconstructedState> out(times.size());
    size_t nb = 0;  // bounces applied
    for (size_t idx : order) {
        double t = times[idx];
        ReconstructedState& rs = out[idx];
        rs.t = t;
        while (nb < seq.bounces.size() && seq.bounces[nb].tau <= t) {
            const Bounce& b = seq.bounces[nb];
            double x;
            bool beyond = false;
            if (b.side < r) {
                x = 0.5 * (uu[b.side] + uu[b.side + 1]);
            } else {
                beyond = beyond_last(table, map, b.hit);
                x = uu[0] - 1;
            }
            cross(x, beyond);
            ++nb;
        }
        cdouble w = nb == 0 ? L.w0 + std::polar(1.0, L.chi) * t
                            : seq.bounces[nb - 1].hit + std::polar(1.0, seq.bounces[nb - 1].chi) * (t - seq.bounces[nb - 1].tau);
        rs.w = w;
        cdouble up;
        try {
            up = (t == 0) ? fold_u(u0, L.lower) : map.inverse(w);
        } catch (const Error& e) {
            rs.error = e.what();
            continue;
        }
        cdouble u = fold_u(up, lower);
        cdouble lg = 0;
        for (int a = 0; a <= r; ++a) {
            cdouble d = u - uu[a];
            double ar = std::atan2(d.imag(), d.real());
            if (d.imag() == 0 && d.real() < 0)
                ar = lower ? -kPi : kPi;
            lg += -mu[a] / (r - 1) * cdouble(std::log(std::abs(d)), ar + 2 * kPi * k[a]);
        }
        rs.u = u;
        rs.x2 = C * std::exp(lg);
        rs.x1 = u * rs.x2;
        rs.ok = true;
    }
    return out;
}

CrossingDensity::CrossingDensity(const ScMap& map) : map_(&map)
{
    const Polygon& P = map.polygon();
    if (!P.bounded)
        throw Error(ErrorCode::InvalidInput, "crossing density needs a bounded spec");
    u_ = map.spec().u_d();
    mu_ = map.spec().mu_d();
    int n = P.sides();
    head_ = std::abs(P.vertices[0] - P.phi_inf);
    N_ = P.perimeter();
    off_.resize(n);
    off_[0] = head_ / N_;
    for (int a = 0; a + 1 < n; ++a)
        off_[a + 1] = off_[a] + std::abs(P.vertices[a + 1] - P.vertices[a]) / N_;
}

double CrossingDensity::pdf(double u) const
{
    double s = 0;
    for (size_t a = 0; a < u_.size(); ++a) {
        if (u == u_[a])
            return mu_[a] < 1 ? INFINITY : 0;
        s += (mu_[a] - 1) * std::log(std::abs(u - u_[a]));
    }
    return std::exp(s) / N_;
}

double CrossingDensity::cdf(double u) const
{
    const Polygon& P = map_->polygon();
    int n = P.sides();
    // exactly on a prevertex the map is evaluated at its singular point
    for (int a = 0; a < n; ++a)
        if (u == u_[a])
            return off_[a];
    if (u <= u_.front())
        return std::abs(map_->eval(cdouble(u)) - P.phi_inf) / N_;
    for (int a = 0; a + 1 < n; ++a)
        if (u <= u_[a + 1])
            return off_[a] + std::abs(map_->eval(cdouble(u)) - P.vertices[a]) / N_;
    return off_[n - 1] + std::abs(map_->eval(cdouble(u)) - P.vertices[n - 1]) / N_;
}

double CrossingDensity::ks(const std::vector<double>& u) const
{
    std::vector<double> F;
    F.reserve(u.size());
    for (double x : u)
        F.push_back(cdf(x));
    std::sort(F.begin(), F.end());
    double n = static_cast<double>(F.size()), d = 0;
    for (size_t k = 0; k < F.size(); ++k)
        d = std::max({d, (k + 1) / n - F[k], F[k] - k / n});
    return d;
}

std::vector<double> crossing_positions(const Trajectory& traj)
{
    std::vector<double> u;
    for (const auto& e : traj.events)
        u.push_back(e.u);
    return u;
}

OccupationHistogram::OccupationHistogram()
{
    time.assign(static_cast<size_t>((log_hi - log_lo) * per_decade), 0.0);
    count.assign(time.size(), 0);
}

void OccupationHistogram::add(double value, double dt)
{
    total += dt;
    max_value = std::max(max_value, value);
    int k = value > 0 ? static_cast<int>(std::floor((std::log10(value) - log_lo) * per_decade)) : 0;
    k = std::clamp(k, 0, bins() - 1);
    time[k] += dt;
    count[k] += 1;
}

double OccupationHistogram::bin_lo(int k) const { return std::pow(10.0, log_lo + double(k) / per_decade); }

StepObserver OccupationHistogram::observer(int component, int subdiv)
{
    return [this, component, subdiv](const StepView& v) {
        double h = std::abs(v.t1 - v.t0) / subdiv;
        for (int i = 0; i < subdiv; ++i) {
            auto y = v.at((i + 0.5) / subdiv);
            add(std::abs(y[component]), h);
        }
    };
}

OccupationHistogram occupation_from_samples(const Trajectory& traj, int component)
{
    OccupationHistogram h;
    const auto& s = traj.samples;
    for (size_t k = 0; k < s.size(); ++k) {
        double lo = k > 0 ? 0.5 * (s[k].t + s[k - 1].t) : s[k].t;
        double hi = k + 1 < s.size() ? 0.5 * (s[k].t + s[k + 1].t) : s[k].t;
        h.add(std::abs(component == 0 ? s[k].x1 : s[k].x2), std::abs(hi - lo));
    }
    return h;
}

TailFit tail_exponent(const OccupationHistogram& h, const TailOptions& opt)
{
    if (!(h.total > 0) || !(h.max_value > 0))
        throw Error(ErrorCode::InsufficientTail, "empty occupation histogram");
    TailFit f;
    double top = std::log10(h.max_value) - opt.top_margin;
    double bot = top - opt.decades;
    f.B_lo = std::pow(10.0, bot);
    f.B_hi = std::pow(10.0, top);
    std::vector<double> lx, ld, lb, lf;
    for (int k = 0; k < h.bins(); ++k) {
        double a = std::log10(h.bin_lo(k)), b = std::log10(h.bin_lo(k + 1));
        if (a < bot - 1e-9 || b > top + 1e-9)
            continue;
        f.samples_above += h.count[k];
        if (h.time[k] <= 0)
            continue;
        double width = h.bin_lo(k + 1) - h.bin_lo(k);
        lx.push_back(0.5 * (a + b));
        ld.push_back(std::log10(h.time[k] / (h.total * width)));
        double above = 0;
        for (int j = k; j < h.bins(); ++j)
            above += h.time[j];
        lb.push_back(a);
        lf.push_back(std::log10(above / h.total));
    }
    // tail sub-samples counted from the window up
    long above = 0;
    for (int k = 0; k < h.bins(); ++k)
        if (std::log10(h.bin_lo(k)) >= bot - 1e-9)
            above += h.count[k];
    f.samples_above = above;
    if (above < opt.min_samples || lx.size() < 3)
        throw Error(ErrorCode::InsufficientTail, "only " + std::to_string(above) + " samples above the fit window");
    LineFit d = fit_line(lx, ld), fr = fit_line(lb, lf);
    f.density_slope = d.b;
    f.density_err = d.err_b;
    f.fraction_slope = fr.b;
    f.fraction_err = fr.err_b;
    // a bounded occupation flattens or piles up just below its maximum,
    // a power-law tail keeps falling; the bin holding the maximum is partial
    std::vector<double> tx, ty;
    long top_count = 0;
    for (int k = 0; k < h.bins(); ++k) {
        double a = std::log10(h.bin_lo(k)), b = std::log10(h.bin_lo(k + 1));
        if (a < top - 1e-9 || b > std::log10(h.max_value) || h.time[k] <= 0)
            continue;
        top_count += h.count[k];
        tx.push_back(0.5 * (a + b));
        ty.push_back(std::log10(h.time[k] / (h.total * (h.bin_lo(k + 1) - h.bin_lo(k)))));
    }
    f.top_slope = tx.size() >= 2 && top_count >= opt.min_samples ? fit_line(tx, ty).b : d.b;
    f.bounded_support = d.b > -1 || f.top_slope > -2;
    return f;
}

LyapunovResult lyapunov_benettin(std::vector<cdouble> x, const std::vector<cdouble>& dir,
                                 const std::function<bool(std::vector<cdouble>&, double)>& advance,
                                 const std::function<double(const std::vector<cdouble>&)>& size,
                                 const LyapunovOptions& opt)
{
    LyapunovResult res;
    auto norm = [](const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
        double s = 0;
        for (size_t i = 0; i < a.size(); ++i)
            s += std::norm(a[i] - b[i]);
        return std::sqrt(s);
    };
    double dn = 0;
    for (const auto& c : dir)
        dn += std::norm(c);
    dn = std::sqrt(dn);
    auto place = [&](const std::vector<cdouble>& base, const std::vector<cdouble>& d, double scale, double len) {
        std::vector<cdouble> y(base.size());
        for (size_t i = 0; i < base.size(); ++i)
            y[i] = base[i] + d[i] * (len * scale);
        return y;
    };
    double d0 = opt.delta0;
    std::vector<cdouble> y = place(x, dir, size(x) / dn, d0);
    double sum = 0, t = 0, last = d0;
    while (t < opt.t_max - 1e-12) {
        double h = std::min(opt.chunk, opt.t_max - t);
        if (!advance(x, h) || !advance(y, h)) {
            res.aborted = true;
            break;
        }
        t += h;
        double sx = size(x);
        if (sx > opt.measure_limit)
            continue;
        double d = norm(x, y) / sx;
        if (!(d > 0))
            continue;
        std::vector<cdouble> diff(x.size());
        for (size_t i = 0; i < x.size(); ++i)
            diff[i] = y[i] - x[i];
        if (d > opt.jump_factor * last) {
            // separated by a corner: excluded from the growth record
            ++res.jumps;
            res.jump_times.push_back(t);
            y = place(x, diff, 1.0 / d, d0);
            last = d0;
            res.times.push_back(t);
            res.log_growth.push_back(sum);
            continue;
        }
        if (d > opt.renorm) {
            sum += std::log(d / d0);
            y = place(x, diff, 1.0 / d, d0);
            ++res.renormalizations;
            last = d0;
            res.times.push_back(t);
            res.log_growth.push_back(sum);
            continue;
        }
        last = d;
        res.times.push_back(t);
        res.log_growth.push_back(sum + std::log(d / d0));
    }
    res.t_reached = t;
    // slope of the growth record after the first tenth
    std::vector<double> ft, fg, G;
    for (size_t i = 0; i < res.times.size(); ++i) {
        if (res.times[i] < 0.1 * res.t_reached)
            continue;
        ft.push_back(res.times[i]);
        fg.push_back(res.log_growth[i]);
        G.push_back(std::exp(std::min(res.log_growth[i], 700.0)));
    }
    LineFit f = fit_line(ft, fg);
    res.lambda = f.b;
    res.stderr_lambda = f.err_b;
    res.exp_r2 = f.r2;
    res.linear_r2 = fit_line(ft, G).r2;
    return res;
}

LyapunovResult lyapunov_estimate(const BilliardSpec& spec, const InitialCondition& init, const IntegrationConfig& cfg,
                                 const LyapunovOptions& opt)
{
    IntegrationConfig c = cfg;
    c.store_samples = false;
    c.detect_events = false;
    auto advance = [&](std::vector<cdouble>& s, double dt) {
        InitialCondition ic;
        ic.x1 = cquad(quad(s[0].real()), quad(s[0].imag()));
        ic.x2 = cquad(quad(s[1].real()), quad(s[1].imag()));
        c.t_end = dt;
        Trajectory tr = integrate(spec, ic, c);
        if (tr.status != TrajStatus::Completed)
            return false;
        s[0] = to_cdq(tr.x1_final);
        s[1] = to_cdq(tr.x2_final);
        return true;
    };
    auto size = [](const std::vector<cdouble>& s) { return std::sqrt(std::norm(s[0]) + std::norm(s[1])); };
    std::vector<cdouble> x0{to_cdq(init.x1), to_cdq(init.x2)};
    // perturb transversally to the flow and to the scaling direction
    std::vector<cdouble> dir{cdouble(0.6, 0.3), cdouble(-0.2, 0.7)};
    return lyapunov_benettin(x0, dir, advance, size, opt);
}

namespace {

struct Lorenz {
    void operator()(const std::array<cdouble, 3>& y, std::array<cdouble, 3>& f) const
    {
        double x = y[0].real(), yy = y[1].real(), z = y[2].real();
        f[0] = 10.0 * (yy - x);
        f[1] = x * (28.0 - z) - yy;
        f[2] = x * yy - 8.0 / 3.0 * z;
    }
};

bool lorenz_advance(std::vector<cdouble>& s, double dt)
{
    Dop853<double, 3, Lorenz> st(Lorenz{}, 1e-12, 1e-12);
    st.init(0.0, {s[0], s[1], s[2]}, 0.0, 1, 1e30);
    while (st.t() < dt) {
        if (st.step(dt, 1e-14) != Dop853<double, 3, Lorenz>::StepStatus::Accepted)
            return false;
    }
    for (int i = 0; i < 3; ++i)
        s[i] = st.y()[i];
    return true;
}

} // namespace

LyapunovResult lyapunov_lorenz(const LyapunovOptions& opt)
{
    std::vector<cdouble> x{1.0, 1.0, 20.0};
    // settle onto the attractor
    lorenz_advance(x, 50);
    auto size = [](const std::vector<cdouble>&) { return 1.0; };
    std::vector<cdouble> dir{1.0, 0.5, -0.3};
    return lyapunov_benettin(x, dir, lorenz_advance, size, opt);
}

double corner_constant(const BilliardSpec& spec, int a)
{
    std::vector<double> mu = spec.mu_d(), u = spec.u_d();
    double K = std::abs(mu[a]);
    for (size_t b = 0; b < u.size(); ++b)
        if (static_cast<int>(b) != a)
            K *= std::pow(std::abs(u[a] - u[b]), 1 - mu[b]);
    return K;
}

CornerFit corner_blowup_fit(const BilliardSpec& spec, const Trajectory& traj, double decades)
{
    if (traj.status != TrajStatus::BlowUp)
        throw Error(ErrorCode::InvalidInput, "corner fit needs a blown-up trajectory");
    const auto& S = traj.samples;
    if (S.size() < 10)
        throw Error(ErrorCode::FitWindowTooSmall, "too few samples");
    CornerFit cf;
    cf.corner = S.back().near;
    const int r = spec.r;
    double mu0 = spec.mu_d().at(cf.corner);
    // window fixed in |x2|: decades of |t - t_c| map to decades/(r-1) in |x2|
    double xtop = std::abs(S.back().x2);
    double xlo = xtop * std::pow(10.0, -decades / (r - 1));
    std::vector<size_t> idx;
    for (size_t k = 0; k < S.size(); ++k)
        if (std::abs(S[k].x2) >= xlo && S[k].near == cf.corner)
            idx.push_back(k);
    if (idx.size() < 8)
        throw Error(ErrorCode::FitWindowTooSmall, "only " + std::to_string(idx.size()) + " samples in the window");
    int dir = S.back().t >= S.front().t ? 1 : -1;
    double tl = S.back().t;
    double gap = std::abs(traj.t_blowup - tl);
    if (!(gap > 0))
        gap = std::abs(S.back().t - S[S.size() - 2].t);
    auto ssr = [&](double tc, LineFit* out) {
        std::vector<double> x, y;
        for (size_t k : idx) {
            double d = (tc - S[k].t) * dir;
            if (!(d > 0))
                return double(INFINITY);
            x.push_back(std::log(d));
            y.push_back(std::log(std::abs(S[k].x2)));
        }
        LineFit f = fit_line(x, y);
        if (out)
            *out = f;
        double s = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            double e = y[i] - f.a - f.b * x[i];
            s += e * e;
        }
        return s;
    };
    // golden-section search for t_c
    double a = tl + dir * 1e-3 * gap, b = tl + dir * 20 * gap;
    const double g = (std::sqrt(5.0) - 1) / 2;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = ssr(c, nullptr), fd = ssr(d, nullptr);
    for (int it = 0; it < 200 && std::abs(b - a) > 1e-15 * std::max(1.0, std::abs(tl)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ssr(c, nullptr);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ssr(d, nullptr);
        }
    }
    cf.t_c = 0.5 * (a + b);
    LineFit fx;
    ssr(cf.t_c, &fx);
    cf.exponent_x2 = fx.b;
    // u - u_a drops below the working precision long before x2 does for
    // small mu, so the u window is the last decades of t - t_c where the
    // offset is still resolved
    double ua = spec.u_d().at(cf.corner);
    double floor_u = std::pow(10.0, -(traj.digits - 3)) * std::max(1.0, std::abs(ua));
    std::vector<std::pair<double, double>> cand;
    for (size_t k = 0; k < S.size(); ++k) {
        double dt = (cf.t_c - S[k].t) * dir;
        double du = std::abs(S[k].du);
        if (S[k].near == cf.corner && dt > 0 && du > floor_u && du < 1e-2)
            cand.push_back({dt, du});
    }
    double dt_min = INFINITY;
    for (const auto& c : cand)
        dt_min = std::min(dt_min, c.first);
    std::vector<double> x, y, Ks;
    for (const auto& [dt, du] : cand) {
        if (dt > dt_min * std::pow(10.0, decades))
            continue;
        x.push_back(std::log(dt));
        y.push_back(std::log(du));
        Ks.push_back(std::pow(du, mu0) / dt);
    }
    if (x.size() < 8)
        throw Error(ErrorCode::FitWindowTooSmall, "u offset unresolved near the corner");
    LineFit fu = fit_line(x, y);
    cf.exponent_u = fu.b;
    std::sort(Ks.begin(), Ks.end());
    cf.K_measured = Ks.empty() ? 0 : Ks[Ks.size() / 2];
    cf.K_predicted = corner_constant(spec, cf.corner);
    cf.ratio_error = std::abs(S.back().du);
    cf.points = static_cast<long>(x.size());
    cf.window_lo = std::exp(x.empty() ? 0 : *std::min_element(x.begin(), x.end()));
    cf.window_hi = std::exp(x.empty() ? 0 : *std::max_element(x.begin(), x.end()));
    return cf;
}

ChannelAsymptotics channel_asymptotics(const BilliardSpec& spec, const Trajectory& traj)
{
    if (traj.samples.size() < 10)
        throw Error(ErrorCode::InvalidInput, "channel asymptotics needs stored samples");
    std::vector<double> mu = spec.mu_d(), uu = spec.u_d();
    const int r = spec.r;
    const Sample& last = traj.samples.back();
    ChannelAsymptotics ca;
    ca.vertex = last.near;
    if (ca.vertex < 0 || mu[ca.vertex] > 0 || std::abs(last.du) > 1e-2)
        throw Error(ErrorCode::NotEscaped, "u does not settle at a channel prevertex");
    int a = ca.vertex;
    ca.limit_error = std::abs(last.du);
    ca.parallel = mu[a] == 0;
    double T = std::abs(last.t);
    if (!ca.parallel) {
        // |x2| ~ t^(-1/(r-1)) over the last two decades of t
        std::vector<double> x, y;
        for (const auto& s : traj.samples) {
            double t = std::abs(s.t);
            if (t >= T / 100 && std::abs(s.x2) > 0) {
                x.push_back(std::log(t));
                y.push_back(std::log(std::abs(s.x2)));
            }
        }
        ca.x2_slope = fit_line(x, y).b;
        double K = corner_constant(spec, a);
        double pred = std::pow(K * T, -1.0 / (r - 1));
        for (int b = 0; b <= r; ++b)
            if (b != a)
                pred *= std::pow(std::abs(uu[a] - uu[b]), -mu[b] / (r - 1));
        ca.prefactor_ratio = std::abs(last.x2) / pred;
    } else {
        // exponential approach: log|u - u_a| linear in t
        // below ~digits-4 the offset is rounding noise
        double floor_d = std::pow(10.0, -(traj.digits - 4));
        std::vector<double> x, y;
        for (const auto& s : traj.samples) {
            double d = std::abs(s.du);
            if (s.near == a && d < 1e-3 && d > floor_d) {
                x.push_back(std::abs(s.t));
                y.push_back(std::log(d));
            }
        }
        LineFit f = fit_line(x, y);
        ca.exp_rate = f.b;
        ca.exp_r2 = f.r2;
        double A = 1;
        for (int b = 0; b <= r; ++b)
            if (b != a)
                A *= std::pow(std::abs(uu[a] - uu[b]), mu[b] - 1);
        // |rate| = v_par / |A| with |A| = width / pi; v_par <= 1
        ca.exp_rate_predicted = -1.0 / A;
    }
    return ca;
}

bool pole_passage(const Trajectory& traj, double& t_inf, double& modulus, cdouble& limit)
{
    const auto& S = traj.samples;
    size_t best = 0;
    double big = 0;
    for (size_t k = 1; k + 1 < S.size(); ++k) {
        double m = std::abs(S[k].u);
        if (std::isfinite(m) && m > big) {
            big = m;
            best = k;
        }
    }
    if (best == 0 || big < 10)
        return false;
    // 1/u = x2/x1 is regular: quadratic through three samples, root near the middle
    double t0 = S[best - 1].t, t1 = S[best].t, t2 = S[best + 1].t;
    cdouble f0 = S[best - 1].x2 / S[best - 1].x1, f1 = S[best].x2 / S[best].x1, f2 = S[best + 1].x2 / S[best + 1].x1;
    cdouble d01 = (f1 - f0) / (t1 - t0), d12 = (f2 - f1) / (t2 - t1);
    cdouble c2 = (d12 - d01) / (t2 - t0);
    auto q = [&](cdouble t) { return f0 + d01 * (t - t0) + c2 * (t - t0) * (t - t1); };
    auto dq = [&](cdouble t) { return d01 + c2 * (2.0 * t - t0 - t1); };
    cdouble t = t1;
    for (int it = 0; it < 50; ++it)
        t -= q(t) / dq(t);
    t_inf = t.real();
    limit = 1.0 / dq(t);
    modulus = std::abs(limit);
    return true;
}

ScatteringReport scattering_asymptotics(const BilliardSpec& spec, const Trajectory& forward,
                                        const Trajectory& backward)
{
    if (spec.bounded())
        throw Error(ErrorCode::InvalidInput, "scattering needs an unbounded spec");
    ScatteringReport rep;
    rep.forward = channel_asymptotics(spec, forward);
    rep.backward = channel_asymptotics(spec, backward);
    double t_inf = 0, mod = 0;
    cdouble lim;
    if (pole_passage(forward, t_inf, mod, lim)) {
        rep.pole_found = true;
        rep.pole_t = t_inf;
        rep.pole_modulus = mod;
    }
    return rep;
}

std::optional<PeriodResult> periodic_from_perpendicular(const BilliardSpec& spec, double u0, double t_max,
                                                        const IntegrationConfig& cfg, double tol)
{
    quad chi0 = perpendicular_phase(spec, quad(u0));
    InitialCondition init = state_from(spec, cquad(quad(u0)), chi0);
    ScMap map(spec, cdouble(u0, 0));
    Table table(map.polygon());
    BounceSequence bs = trace_from_launch(map, table, init, t_max, 10000000);
    if (bs.terminal == Terminal::CornerHit)
        throw Error(ErrorCode::CornerEncounter, "perpendicular launch runs into a corner");
    PeriodResult pr;
    if (auto p = detect_periodic(table, bs, 1e-8, false)) {
        pr.billiard_T = p->T;
        pr.billiard_m = p->m;
    }

    IntegrationConfig c = cfg;
    c.t_end = t_max;
    c.store_samples = false;
    c.detect_events = true;
    Trajectory tr = integrate(spec, init, c);
    if (tr.status == TrajStatus::BlowUp)
        throw Error(ErrorCode::CornerEncounter, "blow-up at t = " + std::to_string(tr.t_final));
    cdouble x1 = to_cdq(init.x1), x2 = to_cdq(init.x2);
    double scale = std::sqrt(std::norm(x1) + std::norm(x2));
    const CrossingEvent* hit = nullptr;
    for (const auto& e : tr.events) {
        double d = std::sqrt(std::norm(e.x1 - x1) + std::norm(e.x2 - x2)) / scale;
        if (d < 1e-3 && e.t > 1e-6) {
            hit = &e;
            pr.recurrence = d;
            break;
        }
    }
    if (!hit)
        return std::nullopt;
    pr.T = hit->t;
    for (const auto& e : tr.events)
        if (e.t < pr.T - 1e-9)
            ++pr.crossings;
    ++pr.crossings;  // the return itself
    // sampled comparison x(t + T) against x(t) over one period
    const int M = 64;
    IntegrationConfig s = cfg;
    s.t_end = 2 * pr.T;
    s.sample_dt = pr.T / M;
    s.detect_events = false;
    Trajectory tt = integrate(spec, init, s);
    if (tt.status != TrajStatus::Completed)
        throw Error(ErrorCode::CornerEncounter, "blow-up while sampling the period");
    for (int k = 0; k + M < static_cast<int>(tt.samples.size()) && k <= M; ++k) {
        const Sample &a = tt.samples[k], &b = tt.samples[k + M];
        double n = 1 + std::sqrt(std::norm(a.x1) + std::norm(a.x2));
        pr.sampled = std::max(pr.sampled, std::sqrt(std::norm(a.x1 - b.x1) + std::norm(a.x2 - b.x2)) / n);
    }
    if (pr.recurrence > tol)
        return std::nullopt;
    return pr;
}

std::vector<cdouble> poincare_section(const Trajectory& traj)
{
    std::vector<cdouble> p;
    for (const auto& e : traj.events)
        p.push_back(e.x2);
    return p;
}

BoxDimension box_counting(const std::vector<cdouble>& pts, const BoxOptions& opt)
{
    BoxDimension bd;
    std::vector<double> X, Y;
    for (const auto& z : pts) {
        double m = std::abs(z);
        if (m > 0 && std::isfinite(m)) {
            X.push_back(std::log(m));
            Y.push_back(std::arg(z));
        }
    }
    if (X.size() < 16)
        throw Error(ErrorCode::FitWindowTooSmall, "too few section points");
    std::vector<double> xs = X;
    std::sort(xs.begin(), xs.end());
    double lo = xs[static_cast<size_t>(opt.quantile * (xs.size() - 1))];
    double hi = xs[static_cast<size_t>((1 - opt.quantile) * (xs.size() - 1))];
    if (!(hi > lo))
        throw Error(ErrorCode::FitWindowTooSmall, "degenerate section");
    std::vector<std::pair<double, double>> P;
    for (size_t i = 0; i < X.size(); ++i)
        if (X[i] >= lo && X[i] <= hi)
            P.push_back({(X[i] - lo) / (hi - lo), (Y[i] + kPi) / (2 * kPi)});
    bd.points = static_cast<long>(P.size());
    // refine until the boxes hold fewer than min_occupancy points on average
    for (int k = 1; k <= 20; ++k) {
        long n = 1L << k;
        std::vector<long> key;
        key.reserve(P.size());
        for (const auto& p : P) {
            long i = std::min(n - 1, static_cast<long>(p.first * n));
            long j = std::min(n - 1, static_cast<long>(p.second * n));
            key.push_back(i * n + j);
        }
        std::sort(key.begin(), key.end());
        long boxes = std::unique(key.begin(), key.end()) - key.begin();
        if (double(P.size()) / boxes < opt.min_occupancy)
            break;
        bd.eps.push_back(1.0 / n);
        bd.counts.push_back(static_cast<double>(boxes));
    }
    if (static_cast<int>(bd.eps.size()) < opt.fit_scales)
        throw Error(ErrorCode::FitWindowTooSmall, "too few resolved scales");
    std::vector<double> lx, ly;
    for (size_t k = bd.eps.size() - opt.fit_scales; k < bd.eps.size(); ++k) {
        lx.push_back(-std::log(bd.eps[k]));
        ly.push_back(std::log(bd.counts[k]));
    }
    LineFit f = fit_line(lx, ly);
    bd.dimension = f.b;
    bd.stderr_dim = f.err_b;
    return bd;
}

nlohmann::json CorrespondenceReport::to_json() const
{
    nlohmann::json j;
    j["straightness_residual"] = straightness_residual;
    j["speed_residual"] = speed_residual;
    j["reflection_residual"] = reflection_residual;
    j["conservation"] = conservation;
    j["chi_sequence"] = chi_sequence;
    j["bounce_match"] = bounce_match;
    j["crossings"] = crossings;
    j["bounce_comparison"] = {{"compared", comparison.compared},
                              {"sides_match", comparison.sides_match},
                              {"count_match", comparison.count_match},
                              {"max_dtau", comparison.max_dtau},
                              {"max_dchi", comparison.max_dchi}};
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}});
    j["all_pass"] = all_pass();
    return j;
}

bool CorrespondenceReport::all_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

CorrespondenceReport verify_correspondence(const BilliardSpec& spec, const InitialCondition& init,
                                           const IntegrationConfig& cfg, const VerifyOptions& opt)
{
    Trajectory tr = integrate(spec, init, cfg);
    cdouble u0 = to_cdq(init.u0);
    ScMap map(spec, u0.imag() >= 0 ? u0 : std::conj(u0));
    Table table(map.polygon());
    ImageOrbit img = image_orbit(map, tr, init);
    BounceSequence seq = trace_from_launch(map, table, init, tr.t_final);
    CorrespondenceReport rep;
    double D = table.diameter();
    rep.straightness_residual = img.straightness / D;
    rep.speed_residual = img.speed;
    rep.reflection_residual = img.reflection;
    rep.conservation = tr.max_dev;
    rep.crossings = static_cast<long>(img.bounces.bounces.size());
    for (const auto& b : img.bounces.bounces)
        rep.chi_sequence.push_back(b.chi);
    // the final open segment is compared through tau only
    BounceSequence a = img.bounces;
    double limit = tr.t_final;
    if (!a.bounces.empty())
        limit = std::min(limit, a.bounces.back().tau - 1e-9);
    rep.comparison = compare_bounces(a, seq, limit);
    rep.bounce_match = rep.comparison.count_match && rep.comparison.sides_match &&
                       rep.comparison.max_dtau < opt.bounce_tol && rep.comparison.max_dchi < opt.bounce_tol;
    auto add = [&](const std::string& n, double v, double th) { rep.checks.push_back({n, v < th, v, th}); };
    add("straightness", rep.straightness_residual, opt.straightness_tol);
    add("speed", rep.speed_residual, opt.speed_tol);
    add("reflection_law", rep.reflection_residual, opt.bounce_tol);
    add("first_segment", img.first_segment / D, opt.straightness_tol);
    add("bounce_tau", rep.comparison.max_dtau, opt.bounce_tol);
    add("bounce_chi", rep.comparison.max_dchi, opt.bounce_tol);
    rep.checks.push_back({"bounce_sides", rep.comparison.sides_match && rep.comparison.count_match,
                          double(rep.comparison.compared), double(rep.crossings)});
    rep.checks.push_back({"crossings", rep.crossings >= opt.min_crossings, double(rep.crossings),
                          double(opt.min_crossings)});
    return rep;
}

} // namespace scb
