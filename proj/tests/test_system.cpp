#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "scb/error.hpp"
#include "scb/system.hpp"

#include <cmath>
#include <random>

using namespace scb;
namespace bm = boost::multiprecision;

namespace {

Number q(long long p, long long d = 1) { return Number(Rational(p, d)); }

BilliardSpec fig56()
{
    return make_spec(2, {q(1, 2), q(2, 7), q(3, 14)}, {q(-1, 2), q(1, 2), q(3, 2)});
}

double dq(const quad& x) { return static_cast<double>(x); }

double angle_diff(double a, double b)
{
    double d = std::fmod(a - b, 2 * M_PI);
    if (d > M_PI)
        d -= 2 * M_PI;
    if (d < -M_PI)
        d += 2 * M_PI;
    return std::abs(d);
}

} // namespace

TEST_CASE("build_system reproduces the triangle example exactly")
{
    ODESystem sys = build_system(fig56());
    REQUIRE(sys.p.size() == 3);
    // x1' = 3/14 x1^2 + 5/14 x1 x2 - 3/8 x2^2
    CHECK(sys.p[2].rational() == Rational(3, 14));
    CHECK(sys.p[1].rational() == Rational(5, 14));
    CHECK(sys.p[0].rational() == Rational(-3, 8));
    // x2' = x1^2 - 9/7 x1 x2 + 3/28 x2^2
    CHECK(sys.q[2].rational() == 1);
    CHECK(sys.q[1].rational() == Rational(-9, 7));
    CHECK(sys.q[0].rational() == Rational(3, 28));
    CHECK(sys.str() == "x1' = 3/14*x1^2 + 5/14*x1*x2 - 3/8*x2^2\nx2' = x1^2 - 9/7*x1*x2 + 3/28*x2^2");
}

TEST_CASE("spec validation")
{
    CHECK_THROWS_AS(make_spec(2, {q(1, 2), q(3, 7), q(3, 14)}, {q(-1, 2), q(1, 2), q(3, 2)}), Error);
    CHECK_THROWS_AS(make_spec(2, {q(1, 2), q(2, 7), q(3, 14)}, {q(1, 2), q(-1, 2), q(3, 2)}), Error);
    CHECK_THROWS_AS(make_spec(2, {q(5, 2), q(-2), q(1, 2)}, {q(-1, 2), q(1, 2), q(3, 2)}), Error);
    CHECK_THROWS_AS(make_spec(1, {q(0), q(0)}, {q(0), q(1)}), Error);
    CHECK(make_spec(2, {q(-1, 4), q(3, 4), q(1, 2)}, {q(-1, 2), q(1, 2), q(3, 2)}).bounded() == false);
    try {
        make_spec(2, {q(1, 2), q(3, 7), q(3, 14)}, {q(-1, 2), q(1, 2), q(3, 2)});
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidSpec);
        CHECK(std::string(e.what()).find("sum rule") != std::string::npos);
    }
}

TEST_CASE("default prevertices")
{
    auto u2 = default_prevertices(2);
    CHECK(u2[0].rational() == Rational(-3, 2));
    CHECK(u2[2].rational() == Rational(1, 2));
    auto u3 = default_prevertices(3);
    CHECK(u3[0].rational() == Rational(-3, 2));
    CHECK(u3[3].rational() == Rational(3, 2));
}

TEST_CASE("recover_spec inverts build_system")
{
    BilliardSpec s = recover_spec(build_system(fig56()));
    CHECK(s.exact());
    CHECK(s.canonical() == fig56().canonical());

    BilliardSpec eq = make_spec(2, {q(1, 3), q(1, 3), q(1, 3)}, {q(-1), q(0), q(1)});
    CHECK(recover_spec(build_system(eq)).canonical() == eq.canonical());
}

TEST_CASE("Newtonian reduction")
{
    ODESystem k3 = newtonian_system(q(3));
    CHECK(k3.q[0].rational() == -1);
    CHECK(k3.str() == "x1' = x1*x2\nx2' = x1^2 - x2^2");
    CHECK(newtonian_system(q(-1)).q[0].rational() == 1);
    CHECK_THROWS_AS(newtonian_system(q(1)), Error);

    BilliardSpec s = recover_spec(k3);
    quad s2 = bm::sqrt(quad(2));
    CHECK(dq(bm::abs(s.u[0].value() + s2)) < 1e-28);
    CHECK(s.u[1].rational() == 0);
    CHECK(dq(bm::abs(s.u[2].value() - s2)) < 1e-28);
    CHECK(dq(bm::abs(s.mu[0].value() - quad(0.25))) < 1e-28);
    CHECK(s.mu[1].rational() == Rational(1, 2));
    CHECK(dq(bm::abs(s.mu[2].value() - quad(0.25))) < 1e-28);

    // and forward: S = u^3 - 2u gives P = u Q - S = u
    BilliardSpec fw = make_spec(2, {q(1, 4), q(1, 2), q(1, 4)},
                                {Number::approx(-s2), q(0), Number::approx(s2)});
    ODESystem sys = build_system(fw);
    CHECK(dq(bm::abs(sys.p[1].value() - 1)) < 1e-28);
    CHECK(dq(bm::abs(sys.p[0].value())) < 1e-28);
    CHECK(dq(bm::abs(sys.p[2].value())) < 1e-28);
    CHECK(dq(bm::abs(sys.q[0].value() + 1)) < 1e-28);
}

TEST_CASE("recover_spec rejects complex roots")
{
    // S = u^3 + u: take Q = u^2, P = uQ - S = -u
    ODESystem sys;
    sys.r = 2;
    sys.p = {q(0), q(-1), q(0)};
    sys.q = {q(0), q(0), q(1)};
    try {
        recover_spec(sys);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ComplexRoots);
    }
}

TEST_CASE("state_from and normalize_initial")
{
    BilliardSpec s = fig56();
    quad chi = quad(2.51558);
    InitialCondition ic = state_from(s, cquad(quad(0.25)), chi);
    CHECK(dq(bm::abs(quad(abs(conserved_C(s, ic.x1, ic.x2))) - 1)) < 1e-30);
    InitialCondition back = normalize_initial(s, ic.x1, ic.x2);
    CHECK(angle_diff(dq(back.chi0), 2.51558) < 1e-28);
    CHECK(dq(abs(back.u0 - cquad(quad(0.25)))) < 1e-30);

    // scaling by lambda scales |C| by lambda; normalization undoes it
    quad lam = quad(3.7);
    InitialCondition sc = normalize_initial(s, ic.x1 * lam, ic.x2 * lam);
    CHECK(dq(abs(sc.x1 - ic.x1)) < 1e-30);
    CHECK(dq(abs(sc.x2 - ic.x2)) < 1e-30);
    CHECK(dq(bm::abs(abs_C<quad>(s.mu_q(), s.u_q(), 2, ic.x1 * lam, ic.x2 * lam) - lam)) < 1e-29);

    // off-axis start: |x2| = prod |i - u_a|^{-mu_a}
    InitialCondition ii = state_from(s, cquad(0, 1), quad(0.3));
    double expect = 1.0;
    for (int a = 0; a < 3; ++a)
        expect *= std::pow(std::abs(cdouble(0, 1) - s.u[a].to_double()), -s.mu[a].to_double());
    CHECK(std::abs(dq(abs(ii.x2)) - expect) < 1e-14);

    CHECK_THROWS_AS(state_from(s, cquad(quad(0.5)), quad(1)), Error);
    CHECK_THROWS_AS(normalize_initial(s, cquad(0.5), cquad(1)), Error);
}

TEST_CASE("phases: direction mapping and perpendicular launch")
{
    for (int r = 2; r <= 4; ++r)
        for (double chb : {0.1, 1.0, 2.5, 5.9}) {
            quad ch = phase_for_direction(r, quad(chb));
            CHECK(angle_diff(dq(direction_for_phase(r, ch)), chb) < 1e-25);
        }
    BilliardSpec s = fig56();
    // beyond the last prevertex the side direction is 0, so perpendicular is pi/2
    CHECK(angle_diff(dq(perpendicular_phase(s, quad(2))), M_PI / 2) < 1e-28);
    // on (u_1, u_2) the side direction is -11 pi/14
    CHECK(angle_diff(dq(perpendicular_phase(s, quad(1))), -11 * M_PI / 14 + M_PI / 2) < 1e-28);
    // for r = 2, the perpendicular launch makes x1 and x2 purely imaginary times real factors
    InitialCondition ic = state_from(s, cquad(quad(0.4)), perpendicular_phase(s, quad(0.4)));
    CHECK(std::abs(dq(ic.x2.real())) < 1e-30);
}

TEST_CASE("spec JSON roundtrip")
{
    SpecFile f;
    f.spec = fig56();
    f.u0 = cquad(quad(0.25));
    f.chi0 = quad(2.51558);
    auto j = spec_file_to_json(f);
    CHECK(j["mu"][1] == "2/7");
    SpecFile g = spec_file_from_json(j);
    CHECK(g.spec.canonical() == f.spec.canonical());
    CHECK(dq(*g.chi0) == 2.51558);
    CHECK(spec_hash(g.spec) == spec_hash(f.spec));
    CHECK(spec_hash(g.spec).size() == 16);
    auto bad = nlohmann::json::parse(R"({"r":2,"mu":["1/2","3/7","3/14"],"u":["-1/2","1/2","3/2"]})");
    CHECK_THROWS_AS(spec_file_from_json(bad), Error);
}
