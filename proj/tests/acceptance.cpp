// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "scb/billiard.hpp"
#include "scb/correspondence.hpp"
#include "scb/error.hpp"
#include "scb/integrator.hpp"
#include "scb/sc_map.hpp"
#include "scb/system.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

using namespace scb;

namespace {

const double kPi = 3.14159265358979323846;
const double kChi = 2.51558;

Number q(long long p, long long d = 1) { return Number(Rational(p, d)); }

BilliardSpec fig56() { return make_spec(2, {q(1, 2), q(2, 7), q(3, 14)}, {q(-1, 2), q(1, 2), q(3, 2)}); }

BilliardSpec irrational()
{
    quad a = 1 / sqrt(quad(5)), b = 1 / sqrt(quad(7));
    return make_spec(2, {Number::approx(a), Number::approx(b), Number::approx(1 - a - b)},
                     {q(-1, 2), q(1, 2), q(3, 2)});
}

InitialCondition init_at(const BilliardSpec& s, double u0, double chi)
{
    return state_from(s, cquad(quad(u0)), quad(chi));
}

IntegrationConfig quad_cfg(double t_end)
{
    IntegrationConfig c;
    c.t_end = t_end;
    c.precision_digits = 30;
    c.rel_tol = 1e-18;
    c.abs_tol = 1e-21;
    return c;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int n, const char* name, const std::function<Outcome()>& body)
{
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass)
        ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), sec);
    std::fflush(stdout);
}

template <class... A>
std::string fmt(const char* f, A... a)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

// positive rationals with small denominators summing to r - 1, each below 2
std::vector<Number> random_weights(std::mt19937_64& rng, int r, bool exact)
{
    std::uniform_int_distribution<int> num(1, 9), den(1, 7);
    std::uniform_real_distribution<double> U(0.1, 1);
    for (;;) {
        std::vector<Number> w;
        if (exact) {
            Rational s = 0;
            std::vector<Rational> x;
            for (int a = 0; a <= r; ++a) {
                x.emplace_back(num(rng), den(rng));
                s += x.back();
            }
            for (auto& v : x)
                w.emplace_back(v * (r - 1) / s);
        } else {
            std::vector<double> x;
            double s = 0;
            for (int a = 0; a <= r; ++a) {
                x.push_back(U(rng));
                s += x.back();
            }
            quad acc = 0;
            for (int a = 0; a < r; ++a) {
                w.push_back(Number::approx(quad(x[a]) * (r - 1) / s));
                acc += w.back().value();
            }
            w.push_back(Number::approx(quad(r - 1) - acc));
        }
        bool ok = true;
        for (const auto& v : w)
            ok = ok && v.to_double() < 1.9 && v.to_double() > 0.02;
        if (ok)
            return w;
    }
}

std::vector<Number> random_prevertices(std::mt19937_64& rng, int r, bool exact)
{
    std::uniform_int_distribution<int> step(1, 6), den(1, 4);
    std::uniform_real_distribution<double> U(0.3, 1.5);
    std::vector<Number> u;
    if (exact) {
        Rational x(-static_cast<long long>(r), 2);
        for (int a = 0; a <= r; ++a) {
            u.emplace_back(x);
            x += Rational(step(rng), den(rng));
        }
    } else {
        double x = -0.5 * r;
        for (int a = 0; a <= r; ++a) {
            u.push_back(Number::approx(x));
            x += U(rng);
        }
    }
    return u;
}

// one shared 30-digit run of the generic orbit for criteria 6, 7 and 11
struct LongRun {
    Trajectory traj;
    OccupationHistogram hist;
};

LongRun& fig56_long()
{
    static LongRun run = [] {
        LongRun L;
        BilliardSpec s = fig56();
        IntegrationConfig cfg = quad_cfg(5000);
        cfg.store_samples = false;
        L.traj = integrate(s, init_at(s, 0.25, kChi), cfg, L.hist.observer(0));
        return L;
    }();
    return run;
}

} // namespace

int main()
{
    criterion(1, "exact system construction", [] {
        auto t0 = std::chrono::steady_clock::now();
        ODESystem sys = build_system(fig56());
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = sys.p.size() == 3 && sys.q.size() == 3;
        // p[j], q[j] multiply x1^j x2^(2-j)
        const Number P[3] = {q(-3, 8), q(5, 14), q(3, 14)}, Q[3] = {q(3, 28), q(-9, 7), q(1)};
        for (int j = 0; ok && j < 3; ++j)
            ok = sys.p[j].exact() && sys.q[j].exact() && sys.p[j].rational() == P[j].rational() &&
                 sys.q[j].rational() == Q[j].rational();
        return Outcome{ok && sec < 1, fmt("p=(%s,%s,%s) q=(%s,%s,%s) in %.2e s", sys.p[2].str().c_str(),
                                          sys.p[1].str().c_str(), sys.p[0].str().c_str(), sys.q[2].str().c_str(),
                                          sys.q[1].str().c_str(), sys.q[0].str().c_str(), sec)};
    });

    criterion(2, "recover_spec roundtrip", [] {
        auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(2024);
        std::uniform_int_distribution<int> R(2, 5);
        int exact_ok = 0, float_ok = 0;
        double worst = 0;
        for (int k = 0; k < 50; ++k) {
            int r = R(rng);
            BilliardSpec s = make_spec(r, random_weights(rng, r, true), random_prevertices(rng, r, true));
            BilliardSpec back = recover_spec(build_system(s));
            exact_ok += back.exact() && back.canonical() == s.canonical();
        }
        for (int k = 0; k < 50; ++k) {
            int r = R(rng);
            BilliardSpec s = make_spec(r, random_weights(rng, r, false), random_prevertices(rng, r, false));
            BilliardSpec back = recover_spec(build_system(s));
            double e = 0;
            auto m0 = s.mu_d(), m1 = back.mu_d(), u0 = s.u_d(), u1 = back.u_d();
            if (m1.size() != m0.size()) {
                e = INFINITY;
            } else {
                for (size_t a = 0; a < m0.size(); ++a)
                    e = std::max({e, std::abs(m1[a] - m0[a]) / std::max(1.0, std::abs(m0[a])),
                                  std::abs(u1[a] - u0[a]) / std::max(1.0, std::abs(u0[a]))});
            }
            worst = std::max(worst, e);
            float_ok += e < 1e-10;
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return Outcome{exact_ok == 50 && float_ok == 50 && sec < 10,
                       fmt("exact %d/50, float %d/50 (worst %.1e)", exact_ok, float_ok, worst)};
    });

    criterion(3, "conservation of |C|", [] {
        BilliardSpec s = fig56();
        IntegrationConfig cfg = quad_cfg(1000);
        cfg.rel_tol = 1e-16;
        cfg.abs_tol = 1e-19;
        cfg.store_samples = false;
        double d1 = integrate(s, init_at(s, 0.25, kChi), cfg).max_dev;
        cfg.rel_tol /= 2;
        cfg.abs_tol /= 2;
        double d2 = integrate(s, init_at(s, 0.25, kChi), cfg).max_dev;
        return Outcome{d1 < 1e-8 && d2 * 1.5 <= d1, fmt("max dev %.2e, halved tol %.2e (ratio %.2f)", d1, d2, d1 / d2)};
    });

    criterion(4, "ODE image is the billiard orbit", [] {
        BilliardSpec s = fig56();
        IntegrationConfig cfg = quad_cfg(150);
        cfg.sample_dt = 0.01;
        CorrespondenceReport rep = verify_correspondence(s, init_at(s, 0.25, kChi), cfg);
        double diam = ScMap(s, cdouble(0.25, 0)).polygon().diameter;
        bool ok = rep.all_pass() && rep.crossings >= 50 && rep.straightness_residual < 1e-6 * diam &&
                  rep.speed_residual < 1e-6 && rep.comparison.max_dtau < 1e-6 && rep.comparison.max_dchi < 1e-6 &&
                  rep.comparison.sides_match && rep.comparison.count_match;
        return Outcome{ok, fmt("%ld crossings, straightness %.1e, speed %.1e, dtau %.1e, dchi %.1e", rep.crossings,
                               rep.straightness_residual, rep.speed_residual, rep.comparison.max_dtau,
                               rep.comparison.max_dchi)};
    });

    criterion(5, "perpendicular launches are periodic", [] {
        BilliardSpec s = fig56();
        IntegrationConfig cfg;
        auto p = periodic_from_perpendicular(s, 0.4, 500, cfg);
        bool ok = p && p->recurrence < 1e-6;
        int periodic = 0, corner = 0;
        for (int k = 0; k < 20; ++k) {
            try {
                if (auto r = periodic_from_perpendicular(s, -0.45 + 0.1 * k, 500, cfg); r && r->recurrence < 1e-6)
                    ++periodic;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::CornerEncounter)
                    ++corner;
            }
        }
        ok = ok && periodic >= 19 && periodic + corner == 20;
        return Outcome{ok, fmt("u0=0.4: T=%.6f recurrence %.1e; grid %d periodic, %d corner of 20", p ? p->T : 0.0,
                               p ? p->recurrence : 0.0, periodic, corner)};
    });

    criterion(6, "crossing density", [] {
        LongRun& L = fig56_long();
        ScMap map(fig56(), cdouble(0.25, 0));
        CrossingDensity p(map);
        auto u = crossing_positions(L.traj);
        double ks = p.ks(u);
        return Outcome{L.traj.status == TrajStatus::Completed && ks < 0.05,
                       fmt("KS %.4f over %zu crossings (t=%.0f, |C| dev %.1e)", ks, u.size(), L.traj.t_final,
                           L.traj.max_dev)};
    });

    criterion(7, "tail law of |x1|", [] {
        LongRun& L = fig56_long();
        TailFit f = tail_exponent(L.hist);
        bool ok = f.density_slope >= -3.3 && f.density_slope <= -2.7 && f.fraction_slope >= -2.3 &&
                  f.fraction_slope <= -1.7 && !f.bounded_support;
        return Outcome{ok, fmt("density slope %.3f, fraction slope %.3f over B in [%.2f, %.2f]", f.density_slope,
                               f.fraction_slope, f.B_lo, f.B_hi)};
    });

    criterion(8, "corner blow-up exponents", [] {
        BilliardSpec s = fig56();
        ScMap map(s, cdouble(0.25, 0));
        cdouble w0 = map.eval(cdouble(0.25, 0)), v = map.polygon().vertices[0];
        IntegrationConfig cfg = quad_cfg(10);
        cfg.rel_tol = 1e-20;
        cfg.abs_tol = 1e-23;
        cfg.corner_guard = 1e-12;
        Trajectory tr = integrate(s, init_at(s, 0.25, std::arg(v - w0)), cfg);
        if (tr.status != TrajStatus::BlowUp)
            return Outcome{false, std::string("no blow-up: ") + status_name(tr.status)};
        CornerFit f = corner_blowup_fit(s, tr);
        bool ok = f.corner == 0 && std::abs(f.exponent_u - 2) < 0.05 && std::abs(f.exponent_x2 + 1) < 0.05 &&
                  std::abs(f.K_measured / f.K_predicted - 1) < 0.1;
        return Outcome{ok, fmt("mu=1/2 corner: u exponent %.4f, x2 exponent %.4f, |K| %.5f vs %.5f", f.exponent_u,
                               f.exponent_x2, f.K_measured, f.K_predicted)};
    });

    criterion(9, "scattering asymptotics", [] {
        BilliardSpec s = make_spec(2, {q(-1, 4), q(3, 4), q(1, 2)}, {q(-1, 2), q(1, 2), q(3, 2)});
        ScMap map(s, cdouble(0.25, 0));
        double chi = std::arg(map.polygon().phi_inf - map.eval(cdouble(0.25, 0)));
        IntegrationConfig cfg;
        cfg.t_end = 1e4;
        cfg.sample_dt = 0.01;
        Trajectory fwd = integrate(s, init_at(s, 0.25, chi), cfg);
        Trajectory bwd = integrate(s, init_at(s, 0.25, chi + kPi), cfg);
        ScatteringReport R = scattering_asymptotics(s, fwd, bwd);
        bool ok = R.pole_found && std::abs(R.pole_modulus - 1) < 1e-3;
        for (const auto* c : {&R.forward, &R.backward})
            ok = ok && c->limit_error < 1e-4 && std::abs(c->x2_slope + 1) < 0.05;
        return Outcome{ok, fmt("u -> u_%d, %d (err %.1e); x2 slopes %.4f, %.4f; |(t-t_inf)u| = %.5f at t=%.4f",
                               R.forward.vertex, R.backward.vertex,
                               std::max(R.forward.limit_error, R.backward.limit_error), R.forward.x2_slope,
                               R.backward.x2_slope, R.pole_modulus, R.pole_t)};
    });

    criterion(10, "Lyapunov exponent", [] {
        LyapunovOptions lo;
        lo.t_max = 1000;
        LyapunovResult L = lyapunov_lorenz(lo);
        BilliardSpec s = fig56();
        LyapunovOptions o;
        o.t_max = 1e4;
        LyapunovResult R = lyapunov_estimate(s, init_at(s, 0.25, kChi), IntegrationConfig{}, o);
        bool ok = !R.aborted && R.t_reached >= 1e4 * (1 - 1e-9) && std::abs(R.lambda) < 1e-2 &&
                  std::abs(L.lambda / 0.9056 - 1) < 0.1;
        return Outcome{ok, fmt("fig56 lambda %.2e to t=%.0f (%d jumps); Lorenz %.4f vs 0.9056", R.lambda, R.t_reached,
                               R.jumps, L.lambda)};
    });

    criterion(11, "Poincare dimension split", [] {
        LongRun& L = fig56_long();
        BilliardSpec i = irrational();
        IntegrationConfig cfg = quad_cfg(5000);
        cfg.store_samples = false;
        BoxDimension dr = box_counting(poincare_section(L.traj));
        BoxDimension di = box_counting(poincare_section(integrate(i, init_at(i, 0.25, kChi), cfg)));
        return Outcome{dr.dimension <= 1.3 && di.dimension >= 1.7,
                       fmt("rational %.3f (%ld pts), irrational %.3f (%ld pts)", dr.dimension, dr.points,
                           di.dimension, di.points)};
    });

    criterion(12, "billiard oracles", [] {
        BilliardSpec s = fig56();
        Table t(ScMap(s, cdouble(0.25, 0)).polygon());
        auto verts = t.vertices();
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> A(0, 2 * kPi), W(0.05, 0.95);
        TraceOptions o;
        o.max_bounces = 1000;
        int same = 0;
        for (int k = 0; k < 1000; ++k) {
            double a = W(rng), b = W(rng) * (1 - a);
            cdouble p = verts[0] + a * (verts[1] - verts[0]) + b * (verts[2] - verts[0]);
            double chi = A(rng);
            same += same_sequence(trace(t, p, chi, o), fold(t, unfold(t, p, chi, o)), 1e-6, t);
        }
        // directions of a generic orbit
        long long L = 1;
        for (const auto& m : s.mu)
            L = std::lcm(L, static_cast<long long>(boost::multiprecision::denominator(m.rational())));
        o.max_bounces = 10000;
        BounceSequence g = trace(t, (verts[0] + verts[1] + verts[2]) / 3.0, 0.3891, o);
        size_t dirs = direction_set(g, 1e-7).size();
        // perpendicular launches from every side
        int periodic = 0, corners = 0, launches = 0;
        o.max_bounces = 20000;
        for (int side = 0; side < t.sides(); ++side) {
            const Edge& e = t.edges()[side];
            for (int k = 1; k <= 7; ++k, ++launches) {
                cdouble p = e.p0 + (e.s_lo + (e.s_hi - e.s_lo) * (k / 8.0 + 0.013)) * e.d;
                o.start_side = side;
                BounceSequence seq = trace(t, p, t.side_angle(side) + kPi / 2, o);
                if (seq.terminal == Terminal::CornerHit)
                    ++corners;
                else
                    periodic += detect_periodic(t, seq, 1e-8).has_value();
            }
        }
        bool ok = same == 1000 && g.bounces.size() == 10000 && static_cast<long long>(dirs) <= 2 * L &&
                  periodic + corners == launches && periodic > 0;
        return Outcome{ok, fmt("fold/unfold %d/1000; %zu directions (bound %lld); perpendicular %d periodic, "
                               "%d corner of %d",
                               same, dirs, 2 * L, periodic, corners, launches)};
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures ? 1 : 0;
}
