#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "scb/billiard.hpp"
#include "scb/error.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace scb;

namespace {

Number q(long long p, long long d = 1) { return Number(Rational(p, d)); }

BilliardSpec fig56()
{
    return make_spec(2, {q(1, 2), q(2, 7), q(3, 14)}, {q(-1, 2), q(1, 2), q(3, 2)});
}

const Table& fig56_table()
{
    static Table t(ScMap(fig56(), cdouble(0.25)).polygon());
    return t;
}

Table square() { return Table::from_vertices({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

// triangle with angles pi/sqrt5, pi/sqrt7 and the rest
Table irrational_triangle()
{
    double a = M_PI / std::sqrt(5.0), b = M_PI / std::sqrt(7.0);
    double c = M_PI - a - b;
    // law of sines, base of length sin(c)
    return Table::from_vertices({cdouble(0, 0), cdouble(std::sin(c), 0), std::polar(std::sin(b), a)});
}

cdouble interior_point(const Table& t)
{
    cdouble s = 0;
    int n = 0;
    for (size_t k = 0; k < t.vertices().size(); ++k)
        if (!t.at_infinity()[k]) {
            s += t.vertices()[k];
            ++n;
        }
    return s / double(n);
}

double point_line(const Edge& e, cdouble p) { return std::abs(((p - e.p0) * std::conj(e.d)).imag()); }

} // namespace

TEST_CASE("square: diamond orbit of period four")
{
    Table sq = square();
    TraceOptions o;
    o.max_bounces = 40;
    o.start_side = 0;
    BounceSequence s = trace(sq, cdouble(0.5, 0), M_PI / 4, o);
    REQUIRE(s.bounces.size() == 40);
    auto p = detect_periodic(sq, s, 1e-9);
    REQUIRE(p);
    CHECK(p->m == 4);
    CHECK(p->T == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(p->family);
    CHECK(direction_set(s, 1e-6).size() == 4);
    std::set<int> atoms;
    for (const auto& b : s.bounces)
        atoms.insert(int(std::round(((b.hit.real() + 2 * b.hit.imag()) * 1000))));
    CHECK(atoms.size() == 4);
    auto h = boundary_histogram(sq, s, 40);
    CHECK(h.ks > 0.1);
}

TEST_CASE("square: horizontal unfolding is a strip of translated copies")
{
    Table sq = square();
    TraceOptions o;
    o.max_bounces = 10;
    o.start_side = 3;
    Unfolding u = unfold(sq, cdouble(0, 0.3), 0, o);
    REQUIRE(u.cross_t.size() == 10);
    for (size_t k = 0; k < u.cross_t.size(); ++k) {
        CHECK(u.cross_t[k] == doctest::Approx(double(k + 1)).epsilon(1e-14));
        cdouble hit = u.start + u.cross_t[k] * u.dir;
        CHECK(std::abs(hit.imag() - 0.3) < 1e-15);
    }
    BounceSequence f = fold(sq, u);
    for (const auto& b : f.bounces)
        CHECK((b.side == 1 || b.side == 3));
    // any square launch uses at most four directions
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> X(0.05, 0.95), A(0, 2 * M_PI);
    o.max_bounces = 2000;
    o.start_side = -1;
    for (int k = 0; k < 20; ++k) {
        BounceSequence s = trace(sq, cdouble(X(rng), X(rng)), A(rng), o);
        CHECK(direction_set(s, 1e-8).size() <= 4);
    }
}

TEST_CASE("reflection law, unit speed and hits on the recorded sides")
{
    const Table& t = fig56_table();
    TraceOptions o;
    o.max_bounces = 5000;
    BounceSequence s = trace(t, interior_point(t), 0.731, o);
    REQUIRE(s.bounces.size() == 5000);
    double prev_chi = s.chi0, prev_tau = 0;
    cdouble prev = s.start;
    double worst_speed = 0, worst_line = 0, worst_law = 0;
    for (const auto& b : s.bounces) {
        worst_speed = std::max(worst_speed, std::abs(std::abs(b.hit - prev) - (b.tau - prev_tau)));
        const Edge& e = t.edges()[b.side];
        worst_line = std::max(worst_line, point_line(e, b.hit));
        worst_law = std::max(worst_law, angle_dist(b.chi + prev_chi, 2 * t.side_angle(b.side)));
        // the segment between hits stays inside
        CHECK(ScMap(fig56(), cdouble(0.25)).polygon().contains(0.5 * (prev + b.hit), 1e-12));
        prev = b.hit;
        prev_tau = b.tau;
        prev_chi = b.chi;
        if (b.n > 200)
            break;
    }
    CHECK(worst_speed < 1e-12);
    CHECK(worst_line < 1e-12 * t.diameter());
    CHECK(worst_law < 1e-12);
}

TEST_CASE("time reversal replays the bounces backward")
{
    const Table& t = fig56_table();
    TraceOptions o;
    o.max_bounces = 300;
    BounceSequence fw = trace(t, interior_point(t), 1.234, o);
    REQUIRE(fw.bounces.size() == 300);
    const Bounce& last = fw.bounces.back();
    o.start_side = last.side;
    o.max_bounces = 299;
    // reverse the incoming segment
    BounceSequence bw = trace(t, last.hit, 2 * t.side_angle(last.side) - last.chi + M_PI, o);
    REQUIRE(bw.bounces.size() == 299);
    double worst = 0;
    for (size_t k = 0; k < bw.bounces.size(); ++k) {
        const Bounce& f = fw.bounces[fw.bounces.size() - 2 - k];
        CHECK(bw.bounces[k].side == f.side);
        worst = std::max(worst, std::abs(bw.bounces[k].hit - f.hit));
    }
    CHECK(worst < 1e-9 * t.diameter());
}

TEST_CASE("fold of the unfolding reproduces trace")
{
    const Table& t = fig56_table();
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> A(0, 2 * M_PI), W(0.05, 0.95);
    auto verts = t.vertices();
    TraceOptions o;
    o.max_bounces = 1000;
    int same = 0, runs = 0;
    while (runs < 1000) {
        // random barycentric interior point
        double a = W(rng), b = W(rng) * (1 - a);
        cdouble p = verts[0] + a * (verts[1] - verts[0]) + b * (verts[2] - verts[0]);
        double chi = A(rng);
        BounceSequence tr = trace(t, p, chi, o);
        BounceSequence fu = fold(t, unfold(t, p, chi, o));
        same += same_sequence(tr, fu, 1e-6, t);
        ++runs;
    }
    CHECK(same == runs);
}

TEST_CASE("corner aim: CornerHit and the split of nearby orbits")
{
    const Table& t = fig56_table();
    cdouble p = interior_point(t);
    cdouble v = t.vertices()[1];  // angle 2 pi / 7
    double chi = std::arg(v - p);
    TraceOptions o;
    o.max_bounces = 10;
    BounceSequence s = trace(t, p, chi, o);
    CHECK(s.terminal == Terminal::CornerHit);
    CHECK(s.corner == 1);
    CHECK(s.bounces.empty());
    CHECK(s.t_end == doctest::Approx(std::abs(v - p)).epsilon(1e-12));
    // parallel orbits offset by +-delta leave with clearly different directions
    cdouble n = std::polar(1.0, chi + M_PI / 2);
    double gap_prev = -1;
    for (double delta : {1e-3, 1e-5, 1e-7}) {
        BounceSequence a = trace(t, p + delta * n * t.diameter(), chi, o);
        BounceSequence b = trace(t, p - delta * n * t.diameter(), chi, o);
        REQUIRE(a.bounces.size() >= 2);
        REQUIRE(b.bounces.size() >= 2);
        double gap = angle_dist(a.bounces[1].chi, b.bounces[1].chi);
        CHECK(gap > 0.1);
        if (gap_prev > 0)
            CHECK(gap == doctest::Approx(gap_prev).epsilon(1e-3));
        gap_prev = gap;
    }
}

TEST_CASE("perpendicular launches are periodic with parallel families")
{
    const Table& t = fig56_table();
    TraceOptions o;
    o.max_bounces = 20000;
    int periodic = 0, corners = 0;
    for (int side = 0; side < 3; ++side) {
        const Edge& e = t.edges()[side];
        for (int k = 1; k <= 7; ++k) {
            double s = e.s_lo + (e.s_hi - e.s_lo) * (k / 8.0 + 0.013);
            cdouble p = e.p0 + s * e.d;
            o.start_side = side;
            BounceSequence seq = trace(t, p, t.side_angle(side) + M_PI / 2, o);
            if (seq.terminal == Terminal::CornerHit) {
                ++corners;
                continue;
            }
            auto per = detect_periodic(t, seq, 1e-8);
            REQUIRE(per);
            ++periodic;
            CHECK(per->m % 2 == 0);
            CHECK(per->family);
            // the apex of a perpendicular orbit returns to the launch reversed
            bool back = false;
            for (long j = 0; j < per->m; ++j)
                if (seq.bounces[j].side == side && std::abs(seq.bounces[j].hit - p) < 1e-8 * t.diameter())
                    back = true;
            CHECK(back);
        }
    }
    CHECK(periodic + corners == 21);
    CHECK(periodic >= 20);
}

TEST_CASE("rational direction set is bounded by 2 lcm")
{
    const Table& t = fig56_table();
    TraceOptions o;
    o.max_bounces = 10000;
    BounceSequence s = trace(t, interior_point(t), 0.3891, o);
    REQUIRE(s.bounces.size() == 10000);
    auto dirs = direction_set(s, 1e-7);
    MESSAGE("fig56 directions " << dirs.size());
    CHECK(dirs.size() <= 28);
    CHECK(!detect_periodic(t, s, 1e-8));
}

TEST_CASE("irrational triangle: directions keep growing, no period")
{
    Table t = irrational_triangle();
    auto ang = [&](int a) {
        int n = t.sides();
        cdouble din = t.edges()[(a + n - 1) % n].d, dout = t.edges()[a].d;
        return M_PI - std::arg(dout / din);
    };
    CHECK(ang(0) == doctest::Approx(M_PI / std::sqrt(5.0)).epsilon(1e-12));
    TraceOptions o;
    o.max_bounces = 1000;
    BounceSequence s1 = trace(t, interior_point(t), 0.3891, o);
    o.max_bounces = 10000;
    BounceSequence s2 = trace(t, interior_point(t), 0.3891, o);
    size_t n1 = direction_set(s1, 1e-7).size(), n2 = direction_set(s2, 1e-7).size();
    CHECK(n1 > 28);
    CHECK(n2 > n1);
    CHECK(!detect_periodic(t, s2, 1e-8));
}

TEST_CASE("boundary hits are uniform in arclength")
{
    const Table& t = fig56_table();
    TraceOptions o;
    o.max_bounces = 100000;
    BounceSequence s = trace(t, interior_point(t), 0.3891, o);
    REQUIRE(s.terminal == Terminal::Running);
    auto h = boundary_histogram(t, s, 50);
    MESSAGE("KS " << h.ks);
    CHECK(h.n == 100000);
    CHECK(h.ks < 0.02);
    double tot = 0;
    for (double d : h.density)
        tot += d / 50;
    CHECK(tot == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("linear separation of parallel orbits")
{
    const Table& t = fig56_table();
    TraceOptions o;
    o.max_bounces = 400;
    cdouble p = interior_point(t);
    double chi = 0.3891;
    double d0 = 1e-10 * t.diameter();
    BounceSequence a = trace(t, p, chi, o);
    BounceSequence b = trace(t, p + d0 * std::polar(1.0, chi + M_PI / 2), chi, o);
    // compare positions at common times on the corner-free stretch
    double worst_rate = 0;
    size_t n = std::min(a.bounces.size(), b.bounces.size());
    for (size_t k = 0; k < n; ++k) {
        if (a.bounces[k].side != b.bounces[k].side)
            break;
        double sep = std::abs(a.bounces[k].hit - b.bounces[k].hit);
        double tt = a.bounces[k].tau;
        if (tt > 10)
            worst_rate = std::max(worst_rate, std::log(sep / d0) / tt);
        // parallel lines stay parallel: the separation cannot blow up faster than t
        CHECK(sep < d0 * (10 + 10 * tt));
    }
    CHECK(worst_rate < 1e-1);
}

TEST_CASE("unbounded tables: escape through a channel and parallel families")
{
    BilliardSpec sc = make_spec(2, {q(-1, 4), q(3, 4), q(1, 2)}, {q(-1, 2), q(1, 2), q(3, 2)});
    Table t(ScMap(sc, cdouble(0, 1)).polygon());
    REQUIRE(!t.bounded());
    REQUIRE(t.channels().size() == 1);
    CHECK(t.channels()[0].vertex == 0);
    CHECK(t.channels()[0].has_seal);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> A(0, 2 * M_PI);
    TraceOptions o;
    o.max_bounces = 100000;
    int escaped = 0;
    cdouble p = 0;  // image of the base point, inside
    for (int k = 0; k < 50; ++k) {
        BounceSequence s = trace(t, p, A(rng), o);
        if (s.terminal == Terminal::Escaped) {
            ++escaped;
            CHECK(s.channel == 0);
        }
    }
    MESSAGE("escaped " << escaped << " of 50");
    CHECK(escaped >= 45);
    CHECK_THROWS_AS(boundary_histogram(t, trace(t, p, 0.1, o), 10), Error);

    // mu = 0: two parallel walls, perpendicular bouncing is a periodic family
    BilliardSpec par = make_spec(2, {q(0), q(1, 2), q(1, 2)}, {q(-1, 2), q(1, 2), q(3, 2)});
    Table tp(ScMap(par, cdouble(0, 1)).polygon());
    REQUIRE(tp.channels().size() == 1);
    CHECK(tp.channels()[0].parallel);
    const Edge& wall = tp.edges()[0];
    // a point far down the channel on the first wall (it runs in from infinity)
    REQUIRE(std::isinf(wall.s_lo));
    cdouble start = wall.p0 - 3 * tp.diameter() * wall.d;
    o.start_side = 0;
    o.max_bounces = 50;
    BounceSequence s = trace(tp, start, tp.side_angle(0) + M_PI / 2, o);
    auto per = detect_periodic(tp, s, 1e-9);
    REQUIRE(per);
    CHECK(per->m == 2);
    CHECK(per->family);
    // going outward along the channel escapes
    o.start_side = -1;
    BounceSequence out = trace(tp, start + 0.1 * cdouble(0, 1) * wall.d, tp.side_angle(0) + 0.3, o);
    CHECK(out.terminal == Terminal::Escaped);
    CHECK(out.channel == 0);
}

TEST_CASE("degenerate geometry and CSV")
{
    CHECK_THROWS_AS(Table::from_vertices({{0, 0}, {1, 0}, {1, 0}, {0, 1}}), Error);
    Table sq = square();
    TraceOptions o;
    o.max_bounces = 3;
    BounceSequence s = trace(sq, cdouble(0.5, 0.5), 0.2, o);
    std::ostringstream os;
    write_bounces_csv(os, s, "# h\n");
    CHECK(os.str().rfind("# h\nn,tau,side,hit_re,hit_im,chi\n", 0) == 0);
    o.t_max = 0.1;
    BounceSequence r = trace(sq, cdouble(0.5, 0.5), 0.2, o);
    CHECK(r.bounces.empty());
    CHECK(r.t_end == 0.1);
    CHECK(std::abs(r.final_pos - (cdouble(0.5, 0.5) + 0.1 * std::polar(1.0, 0.2))) < 1e-15);
}
