#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "scb/error.hpp"
#include "scb/integrator.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

using namespace scb;

namespace {

Number q(long long p, long long d = 1) { return Number(Rational(p, d)); }

BilliardSpec fig56()
{
    return make_spec(2, {q(1, 2), q(2, 7), q(3, 14)}, {q(-1, 2), q(1, 2), q(3, 2)});
}

InitialCondition fig6_init() { return state_from(fig56(), cquad(quad(0.25)), quad(2.51558)); }

double cd_dist(const cquad& a, const cquad& b) { return static_cast<double>(abs(a - b)); }

} // namespace

TEST_CASE("conservation of |C| over a moderate run")
{
    IntegrationConfig cfg;
    cfg.t_end = 100;
    cfg.rel_tol = 1e-13;
    // double loses digits in the deep corner visit near t = 33.6
    Trajectory tr = integrate(fig56(), fig6_init(), cfg);
    CHECK(tr.status == TrajStatus::Completed);
    CHECK(tr.t_final == doctest::Approx(100));
    CHECK(tr.max_dev < 1e-6);
    cfg.precision_digits = 30;
    cfg.rel_tol = 1e-18;
    cfg.abs_tol = 1e-21;
    Trajectory tq = integrate(fig56(), fig6_init(), cfg);
    CHECK(tq.max_dev < 1e-16);
    CHECK(tr.events.size() > 20);
    for (const auto& s : tr.samples)
        CHECK(std::abs(s.dev) <= tr.max_dev);
}

TEST_CASE("events are refined onto the real axis and time ordered")
{
    IntegrationConfig cfg;
    cfg.t_end = 60;
    Trajectory tr = integrate(fig56(), fig6_init(), cfg);
    auto ev = detect_crossings(tr);
    REQUIRE(!ev.empty());
    for (size_t k = 0; k < ev.size(); ++k) {
        cdouble u = ev[k].x1 / ev[k].x2;
        CHECK(std::abs(u.imag()) < 1e-12 * (1 + std::abs(u)));
        CHECK(ev[k].u == doctest::Approx(u.real()).epsilon(1e-9));
        if (k > 0)
            CHECK(ev[k].t > ev[k - 1].t);
        // alternate half planes
        if (k > 0)
            CHECK(ev[k].direction == -ev[k - 1].direction);
    }
}

TEST_CASE("short run in the upper half plane has no crossings")
{
    IntegrationConfig cfg;
    cfg.t_end = 0.01;
    InitialCondition ic = state_from(fig56(), cquad(0.3, 1.0), quad(1.0));
    Trajectory tr = integrate(fig56(), ic, cfg);
    CHECK(tr.events.empty());
    CHECK(tr.status == TrajStatus::Completed);
}

TEST_CASE("direct and reduced routes agree")
{
    IntegrationConfig cfg;
    cfg.t_end = 200;
    cfg.sample_dt = 0.5;
    cfg.precision_digits = 30;
    cfg.rel_tol = 1e-18;
    cfg.abs_tol = 1e-21;
    Trajectory a = integrate(fig56(), fig6_init(), cfg);
    Trajectory b = integrate_u(fig56(), fig6_init(), cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    double worst = 0, worstx = 0;
    for (size_t k = 0; k < a.samples.size(); ++k) {
        CHECK(a.samples[k].t == doctest::Approx(b.samples[k].t));
        worst = std::max(worst, std::abs(a.samples[k].u - b.samples[k].u) / (1 + std::abs(a.samples[k].u)));
        worstx = std::max(worstx, std::abs(a.samples[k].x2 - b.samples[k].x2) / (1 + std::abs(a.samples[k].x2)));
    }
    CHECK(worst < 1e-6);
    CHECK(worstx < 1e-6);
    // same crossings on both routes
    REQUIRE(a.events.size() == b.events.size());
    for (size_t k = 0; k < a.events.size(); ++k) {
        CHECK(std::abs(a.events[k].t - b.events[k].t) < 1e-7);
        CHECK(a.events[k].side == b.events[k].side);
    }
}

TEST_CASE("reduced route follows the leading series term")
{
    // u(t) = u0 + kappa prod (u0-u_a)^(1-mu_a) t + O(t^2)
    BilliardSpec s = fig56();
    cquad u0(0.2, 0.7);
    InitialCondition ic = state_from(s, u0, quad(0.9));
    IntegrationConfig cfg;
    cfg.t_end = 1e-4;
    Trajectory tr = integrate_u(s, ic, cfg);
    cdouble uu0(0.2, 0.7);
    cdouble prod(1);
    for (int a = 0; a < 3; ++a)
        prod *= std::pow(uu0 - s.u[a].to_double(), 1 - s.mu[a].to_double());
    cdouble kappa = std::polar(1.0, 0.9);
    cdouble pred = uu0 + kappa * prod * 1e-4;
    CHECK(std::abs(tr.samples.back().u - pred) < 1e-7);
    InitialCondition bad = ic;
    bad.u0 = cquad(quad(0.5));
    CHECK_THROWS_AS(integrate_u(s, bad, cfg), Error);
}

TEST_CASE("time reversal returns to the initial state")
{
    IntegrationConfig cfg;
    cfg.t_end = 30;
    cfg.rel_tol = 1e-14;
    InitialCondition ic = state_from(fig56(), cquad(0.25, 0.3), quad(2.51558));
    Trajectory fw = integrate(fig56(), ic, cfg);
    InitialCondition back = ic;
    back.x1 = fw.x1_final;
    back.x2 = fw.x2_final;
    cfg.t_end = -30;
    Trajectory bw = integrate(fig56(), back, cfg);
    CHECK(bw.status == TrajStatus::Completed);
    CHECK(cd_dist(bw.x1_final, ic.x1) < 1e-9);
    CHECK(cd_dist(bw.x2_final, ic.x2) < 1e-9);
    // the backward run crosses at the same times, reversed
    CHECK(bw.events.size() == fw.events.size());
}

TEST_CASE("homogeneity: lambda x(lambda t) is again a solution")
{
    IntegrationConfig cfg;
    cfg.t_end = 20;
    cfg.rel_tol = 1e-14;
    InitialCondition ic = fig6_init();
    Trajectory a = integrate(fig56(), ic, cfg);
    quad lam = 2.5;
    InitialCondition sc = ic;
    sc.x1 *= lam;
    sc.x2 *= lam;
    cfg.t_end = 20 / 2.5;
    Trajectory b = integrate(fig56(), sc, cfg);
    CHECK(cd_dist(b.x1_final, a.x1_final * lam) < 1e-8);
    CHECK(cd_dist(b.x2_final, a.x2_final * lam) < 1e-8);
    REQUIRE(a.events.size() == b.events.size());
    for (size_t k = 0; k < a.events.size(); ++k)
        CHECK(b.events[k].t * 2.5 == doctest::Approx(a.events[k].t).epsilon(1e-9));
}

TEST_CASE("extended precision conserves |C| far below double accuracy")
{
    IntegrationConfig cfg;
    cfg.t_end = 5;
    cfg.precision_digits = 30;
    cfg.rel_tol = 1e-24;
    cfg.abs_tol = 1e-28;
    Trajectory tr = integrate(fig56(), fig6_init(), cfg);
    CHECK(tr.digits == 33);
    CHECK(tr.max_dev < 1e-20);
    cfg.precision_digits = 18;
    cfg.rel_tol = 1e-17;
    cfg.abs_tol = 1e-19;
    Trajectory ld = integrate(fig56(), fig6_init(), cfg);
    CHECK(ld.digits == 18);
    CHECK(ld.max_dev < 1e-14);
    cfg.precision_digits = 40;
    CHECK_THROWS_AS(integrate(fig56(), fig6_init(), cfg), Error);
}

TEST_CASE("conservation error follows the tolerance")
{
    IntegrationConfig cfg;
    cfg.t_end = 100;
    cfg.precision_digits = 30;
    cfg.rel_tol = 1e-14;
    cfg.abs_tol = 1e-17;
    double d1 = integrate(fig56(), fig6_init(), cfg).max_dev;
    cfg.rel_tol = 0.5e-14;
    cfg.abs_tol = 0.5e-17;
    double d2 = integrate(fig56(), fig6_init(), cfg).max_dev;
    MESSAGE("budget " << d1 << " -> " << d2);
    CHECK(d2 * 1.5 <= d1);
}

TEST_CASE("system and spec entry points agree; CSV output")
{
    IntegrationConfig cfg;
    cfg.t_end = 5;
    Trajectory a = integrate(fig56(), fig6_init(), cfg);
    Trajectory b = integrate(build_system(fig56()), fig6_init(), cfg);
    CHECK(a.samples.size() == b.samples.size());
    CHECK(cd_dist(a.x1_final, b.x1_final) == 0);
    std::ostringstream os;
    write_trajectory_csv(os, a, "# test\n");
    CHECK(os.str().find("t,re_x1,im_x1,re_x2,im_x2,re_u,im_u,absC\n") != std::string::npos);
    std::ostringstream oe;
    write_events_csv(oe, a.events);
    CHECK(oe.str().rfind("t,u,direction", 0) == 0);
}

TEST_CASE("observer sees every step with a consistent dense interpolant")
{
    IntegrationConfig cfg;
    cfg.t_end = 3;
    long n = 0;
    double worst = 0;
    Trajectory tr = integrate(fig56(), fig6_init(), cfg, [&](const StepView& v) {
        ++n;
        auto a = v.at(0.0), b = v.at(1.0);
        worst = std::max({worst, std::abs(a[0] - v.y0[0]), std::abs(b[1] - v.y1[1])});
    });
    CHECK(n == tr.steps);
    CHECK(worst < 1e-13);
}
