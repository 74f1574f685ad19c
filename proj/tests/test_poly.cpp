#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "scb/error.hpp"
#include "scb/poly.hpp"

#include <random>

using namespace scb;

namespace {

Number q(long long p, long long d = 1) { return Number(Rational(p, d)); }

Polynomial poly(std::vector<Number> c) { return Polynomial(std::move(c)); }

} // namespace

TEST_CASE("number parsing keeps rationals exact")
{
    CHECK(Number::parse("3/14").rational() == Rational(3, 14));
    CHECK(Number::parse("-1/2").rational() == Rational(-1, 2));
    CHECK(Number::parse("0.25").rational() == Rational(1, 4));
    CHECK(Number::parse("1.5e-1").rational() == Rational(3, 20));
    CHECK(Number::parse("7").rational() == 7);
    CHECK(Number::parse("010/-08").rational() == Rational(-5, 4));
    CHECK_THROWS_AS(Number::parse("1/0"), Error);
    CHECK_THROWS_AS(Number::parse("abc"), Error);
    CHECK((q(1, 3) + Number::approx(0.5)).exact() == false);
    CHECK((q(1, 3) * q(3, 7)).str() == "1/7");
}

TEST_CASE("rationalize finds small denominators")
{
    CHECK(rationalize(quad(3) / quad(14), 1000) == Rational(3, 14));
    CHECK(rationalize(quad(-9) / quad(7), 1000) == Rational(-9, 7));
}

TEST_CASE("poly_from_roots")
{
    // hand expansion of (u+1/2)(u-1/2)(u-3/2)
    Polynomial S = poly_from_roots({q(-1, 2), q(1, 2), q(3, 2)});
    CHECK(S == poly({q(3, 8), q(-1, 4), q(-3, 2), q(1)}));
    CHECK(S.monic());
    CHECK(poly_from_roots({}) == poly({q(1)}));
    CHECK(poly_from_roots({q(0)}) == poly({q(0), q(1)}));
    CHECK_THROWS_AS(poly_from_roots({q(1, 2), q(1, 2)}), Error);
    CHECK_THROWS_AS(poly_from_roots({Number::approx(0.5), Number::approx(0.5 + 1e-15)}), Error);
}

TEST_CASE("eval_poly")
{
    Polynomial S = poly_from_roots({q(-1, 2), q(1, 2), q(3, 2)});
    CHECK(S.eval(q(1, 2)).is_zero());
    CHECK(poly({q(1)}).eval(cdouble(0.3, -2.0)) == cdouble(1.0));
    Polynomial Q = poly({q(3, 28), q(-9, 7), q(1)});
    CHECK(Q.eval(q(-1, 2)).rational() == 1);
    // complex evaluation agrees with direct product form
    cdouble z(0.7, 1.3);
    cdouble direct = (z + 0.5) * (z - 0.5) * (z - 1.5);
    CHECK(std::abs(S.eval(z) - direct) < 1e-14);
}

TEST_CASE("derivative")
{
    Polynomial S = poly_from_roots({q(-1, 2), q(1, 2), q(3, 2)});
    CHECK(S.derivative() == poly({q(-1, 4), q(-3), q(3)}));
    CHECK(poly({q(5)}).derivative().is_zero());
}

TEST_CASE("partial_fraction_weights")
{
    std::vector<Number> roots{q(-1, 2), q(1, 2), q(3, 2)};
    Polynomial Q = poly({q(3, 28), q(-9, 7), q(1)});
    auto mu = partial_fraction_weights(Q, roots, 2);
    REQUIRE(mu.size() == 3);
    CHECK(mu[0].rational() == Rational(1, 2));
    CHECK(mu[1].rational() == Rational(2, 7));
    CHECK(mu[2].rational() == Rational(3, 14));

    // symmetric roots and even Q give symmetric end weights
    auto sym = partial_fraction_weights(poly({q(2, 5), q(0), q(1)}), {q(-3), q(0), q(3)}, 2);
    CHECK(sym[0] == sym[2]);

    quad s2 = boost::multiprecision::sqrt(quad(2));
    auto nw = partial_fraction_weights(poly({q(-1), q(0), q(1)}),
                                       {Number::approx(-s2), q(0), Number::approx(s2)}, 2);
    CHECK(boost::multiprecision::abs(nw[0].value() - quad(0.25)) < quad(1e-30));
    CHECK(boost::multiprecision::abs(nw[1].value() - quad(0.5)) < quad(1e-30));
    CHECK(boost::multiprecision::abs(nw[2].value() - quad(0.25)) < quad(1e-30));
}

TEST_CASE("reconstruction identity and sum rule on random rational data")
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> di(-40, 40);
    for (int trial = 0; trial < 20; ++trial) {
        int r = 2 + trial % 3;
        std::vector<int> picks;
        while (static_cast<int>(picks.size()) < r + 1) {
            int v = di(rng);
            if (std::find(picks.begin(), picks.end(), v) == picks.end())
                picks.push_back(v);
        }
        std::sort(picks.begin(), picks.end());
        std::vector<Number> roots;
        for (int v : picks)
            roots.push_back(q(v, 8));
        std::vector<Number> qc;
        for (int k = 0; k < r; ++k)
            qc.push_back(q(di(rng), 5));
        qc.push_back(q(1));
        Polynomial Q(qc);
        auto mu = partial_fraction_weights(Q, roots, r);
        Number s(0);
        for (auto& m : mu)
            s += m;
        CHECK(s.rational() == r - 1);
        Polynomial acc;
        for (int a = 0; a <= r; ++a) {
            std::vector<Number> others;
            for (int b = 0; b <= r; ++b)
                if (b != a)
                    others.push_back(roots[b]);
            acc = acc + mu[a] * poly_from_roots(others);
        }
        CHECK(acc == Number(r - 1) * Q);
    }
}

TEST_CASE("complex_roots recovers simple real roots")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> du(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> xs;
        for (int k = 0; k < 4; ++k)
            xs.push_back(du(rng));
        std::sort(xs.begin(), xs.end());
        std::vector<Number> roots;
        for (double x : xs)
            roots.push_back(Number::approx(x));
        auto z = complex_roots(poly_from_roots(roots));
        REQUIRE(z.size() == 4);
        for (int k = 0; k < 4; ++k) {
            CHECK(std::abs(static_cast<double>(z[k].real()) - xs[k]) < 1e-10 * (1 + std::abs(xs[k])));
            CHECK(std::abs(static_cast<double>(z[k].imag())) < 1e-10);
        }
    }
    auto zi = complex_roots(poly({q(1), q(0), q(1)}));
    REQUIRE(zi.size() == 2);
    CHECK(std::abs(std::abs(static_cast<double>(zi[0].imag())) - 1.0) < 1e-20);
}
