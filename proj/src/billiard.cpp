#include "scb/billiard.hpp"
#include "scb/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace scb {

namespace {

const double kPi = 3.14159265358979323846;
const double kInf = std::numeric_limits<double>::infinity();

double cross(const cdouble& a, const cdouble& b) { return a.real() * b.imag() - a.imag() * b.real(); }

struct Hit {
    double t = kInf;
    int side = -1;
};

// first crossing of p + t e (t > t_min) with the edges mapped through T
Hit nearest_hit(const Table& tb, const Isometry& T, const cdouble& p, const cdouble& e, double t_min, int exclude)
{
    Hit best;
    double slack = 1e-12 * tb.diameter();
    for (const Edge& ed : tb.edges()) {
        if (ed.side == exclude)
            continue;
        cdouble P = T.apply(ed.p0), D = T.linear(ed.d);
        double den = cross(e, D);
        if (std::abs(den) < 1e-15)
            continue;
        cdouble w = P - p;
        double t = cross(w, D) / den;
        double s = cross(w, e) / den;
        if (!(t > t_min) || t >= best.t)
            continue;
        if (s < ed.s_lo - slack || s > ed.s_hi + slack)
            continue;
        best.t = t;
        best.side = ed.side;
    }
    return best;
}

int corner_near(const Table& tb, const Isometry& T, const cdouble& h, double eps)
{
    const auto& v = tb.vertices();
    for (size_t k = 0; k < v.size(); ++k)
        if (!tb.at_infinity()[k] && std::abs(h - T.apply(v[k])) < eps)
            return static_cast<int>(k);
    return -1;
}

// parallel channels never end in "no further hit": a particle past the seal
// moving outward keeps bouncing between the walls forever
int parallel_escape(const Table& tb, const cdouble& p, const cdouble& e)
{
    for (const Channel& c : tb.channels()) {
        if (!c.parallel || !c.has_seal)
            continue;
        double sgn = cross(c.seal_b - c.seal_a, p - c.seal_a);
        if (sgn * c.outward_sign > 0 && (e * std::conj(c.out1)).real() > 1e-12)
            return c.vertex;
    }
    return -1;
}

// channel a ray with no further hits leaves through
int escape_channel(const Table& tb, const cdouble& p, const cdouble& e)
{
    if (tb.channels().empty())
        return -1;
    cdouble far = p + 1e6 * tb.diameter() * e;
    int best = tb.channels().front().vertex;
    double bd = kInf;
    for (const Channel& c : tb.channels()) {
        double d1 = std::abs(cross(c.out1, far - tb.edges()[(c.vertex + tb.sides() - 1) % tb.sides()].p0));
        double d2 = std::abs(cross(c.out2, far - tb.edges()[c.vertex].p0));
        double d = std::min(d1, d2);
        if (d < bd) {
            bd = d;
            best = c.vertex;
        }
    }
    return best;
}

double eps_for(const Table& tb, const TraceOptions& opt)
{
    return opt.corner_eps < 0 ? 1e-9 * tb.diameter() : opt.corner_eps;
}

} // namespace

double wrap_angle(double a)
{
    double r = std::fmod(a, 2 * kPi);
    if (r < 0)
        r += 2 * kPi;
    if (r >= 2 * kPi)
        r = 0;
    return r;
}

double angle_dist(double a, double b) { return std::abs(std::remainder(a - b, 2 * kPi)); }

const char* terminal_name(Terminal t)
{
    switch (t) {
    case Terminal::Running: return "Running";
    case Terminal::CornerHit: return "CornerHit";
    case Terminal::Escaped: return "Escaped";
    }
    return "?";
}

Table::Table(const Polygon& poly)
{
    int n = poly.sides();
    if (n < 2)
        throw Error(ErrorCode::DegenerateGeometry, "polygon needs at least two sides");
    verts_ = poly.vertices;
    inf_ = poly.at_infinity;
    for (int a = 0; a < n; ++a) {
        int b = (a + 1) % n;
        Edge e;
        e.side = a;
        e.d = std::polar(1.0, poly.side_dir[a]);
        if (!inf_[a] && !inf_[b]) {
            cdouble dv = verts_[b] - verts_[a];
            e.p0 = verts_[a];
            e.s_hi = std::abs(dv);
            if (e.s_hi > 0)
                e.d = dv / e.s_hi;
        } else if (!inf_[a]) {
            e.p0 = verts_[a];
            e.s_hi = kInf;
        } else if (!inf_[b]) {
            e.p0 = verts_[b];
            e.s_lo = -kInf;
        } else {
            e.p0 = poly.side_points.at(a);
            e.s_lo = -kInf;
            e.s_hi = kInf;
        }
        edges_.push_back(e);
    }
    for (int a = 0; a < n; ++a) {
        if (!inf_[a])
            continue;
        int p = (a + n - 1) % n, s = (a + 1) % n;
        Channel c;
        c.vertex = a;
        c.out1 = edges_[p].d;
        c.out2 = -edges_[a].d;
        c.parallel = std::abs(cross(c.out1, c.out2)) < 1e-12 && (c.out1 * std::conj(c.out2)).real() > 0;
        if (!inf_[p] && !inf_[s]) {
            c.has_seal = true;
            c.seal_a = verts_[p];
            c.seal_b = verts_[s];
        }
        channels_.push_back(c);
    }
    std::vector<cdouble> pts;
    for (int a = 0; a < n; ++a)
        if (!inf_[a])
            pts.push_back(verts_[a]);
    for (const auto& q : poly.side_points)
        pts.push_back(q);
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            diam_ = std::max(diam_, std::abs(pts[i] - pts[j]));
    finish();
}

Table Table::from_vertices(const std::vector<cdouble>& v)
{
    if (v.size() < 3)
        throw Error(ErrorCode::DegenerateGeometry, "closed polygon needs three vertices");
    Table t;
    int n = static_cast<int>(v.size());
    t.verts_ = v;
    t.inf_.assign(n, false);
    for (int a = 0; a < n; ++a) {
        cdouble dv = v[(a + 1) % n] - v[a];
        Edge e;
        e.side = a;
        e.p0 = v[a];
        e.s_hi = std::abs(dv);
        e.d = e.s_hi > 0 ? dv / e.s_hi : cdouble(1);
        t.edges_.push_back(e);
        for (int b = 0; b < n; ++b)
            t.diam_ = std::max(t.diam_, std::abs(v[a] - v[b]));
    }
    t.finish();
    return t;
}

void Table::finish()
{
    for (const Edge& e : edges_)
        if (!(e.s_hi - e.s_lo > 0))
            throw Error(ErrorCode::DegenerateGeometry, "zero-length side " + std::to_string(e.side));
    if (!(diam_ > 0))
        diam_ = 1;
    for (Channel& c : channels_) {
        if (!c.has_seal)
            continue;
        cdouble far = c.seal_a + 1e3 * diam_ * c.out1;
        c.outward_sign = cross(c.seal_b - c.seal_a, far - c.seal_a) > 0 ? 1 : -1;
    }
}

double Table::perimeter_offset(int a) const
{
    double s = 0;
    for (int k = 0; k < a; ++k)
        s += side_length(k);
    return s;
}

double Table::perimeter() const { return perimeter_offset(sides()); }

BounceSequence trace(const Table& table, cdouble p0, double chi0, const TraceOptions& opt)
{
    BounceSequence seq;
    seq.start = p0;
    seq.chi0 = chi0;
    seq.start_side = opt.start_side;
    double eps = eps_for(table, opt);
    double tmin = 1e-12 * table.diameter();
    Isometry id;
    cdouble p = p0;
    double chi = chi0, tau = 0;
    cdouble e = std::polar(1.0, chi);
    int last = opt.start_side;
    for (long n = 0;; ++n) {
        if (n >= opt.max_bounces)
            break;
        Hit h = nearest_hit(table, id, p, e, tmin, last);
        if (h.side < 0) {
            seq.terminal = Terminal::Escaped;
            seq.channel = escape_channel(table, p, e);
            break;
        }
        if (tau + h.t > opt.t_max) {
            p += (opt.t_max - tau) * e;
            tau = opt.t_max;
            break;
        }
        cdouble hit = p + h.t * e;
        tau += h.t;
        p = hit;
        int c = corner_near(table, id, hit, eps);
        if (c >= 0) {
            seq.terminal = Terminal::CornerHit;
            seq.corner = c;
            break;
        }
        // chi -> 2 theta - chi
        chi = wrap_angle(2 * table.side_angle(h.side) - chi);
        e = std::polar(1.0, chi);
        seq.bounces.push_back({n + 1, tau, h.side, hit, chi});
        last = h.side;
        int ch = parallel_escape(table, p, e);
        if (ch >= 0) {
            seq.terminal = Terminal::Escaped;
            seq.channel = ch;
            break;
        }
    }
    seq.t_end = tau;
    seq.final_pos = p;
    seq.final_chi = chi;
    return seq;
}

Isometry Isometry::inverse() const
{
    Isometry r;
    r.flip = flip;
    if (!flip) {
        r.a = 1.0 / a;
        r.b = -b / a;
    } else {
        r.a = 1.0 / std::conj(a);
        r.b = -std::conj(b) / std::conj(a);
    }
    return r;
}

Isometry Isometry::then(const Isometry& outer) const
{
    Isometry r;
    r.flip = flip != outer.flip;
    r.a = outer.a * (outer.flip ? std::conj(a) : a);
    r.b = outer.a * (outer.flip ? std::conj(b) : b) + outer.b;
    return r;
}

Isometry Isometry::reflection(const cdouble& p0, const cdouble& d)
{
    Isometry r;
    r.flip = true;
    r.a = d * d;
    r.b = p0 - d * d * std::conj(p0);
    return r;
}

Unfolding unfold(const Table& table, cdouble p0, double chi0, const TraceOptions& opt)
{
    Unfolding u;
    u.start = p0;
    u.dir = std::polar(1.0, chi0);
    u.start_side = opt.start_side;
    u.copies.push_back(Isometry{});
    double eps = eps_for(table, opt);
    double tmin = 1e-12 * table.diameter();
    double t = 0;
    int last = opt.start_side;
    for (long n = 0; n < opt.max_bounces; ++n) {
        const Isometry& T = u.copies.back();
        Hit h = nearest_hit(table, T, u.start, u.dir, t + tmin, last);
        if (h.side < 0) {
            Isometry Ti = T.inverse();
            u.terminal = Terminal::Escaped;
            u.channel = escape_channel(table, Ti.apply(u.start + t * u.dir), Ti.linear(u.dir));
            break;
        }
        if (h.t > opt.t_max) {
            t = opt.t_max;
            break;
        }
        t = h.t;
        cdouble hit = u.start + t * u.dir;
        int c = corner_near(table, T, hit, eps);
        if (c >= 0) {
            u.terminal = Terminal::CornerHit;
            u.corner = c;
            break;
        }
        const Edge& ed = table.edges()[h.side];
        // next copy: the current one reflected across the crossed edge
        Isometry next = Isometry::reflection(ed.p0, ed.d).then(T);
        u.copies.push_back(next);
        u.cross_t.push_back(t);
        u.cross_side.push_back(h.side);
        last = h.side;
        Isometry Ni = next.inverse();
        int ch = parallel_escape(table, Ni.apply(hit), Ni.linear(u.dir));
        if (ch >= 0) {
            u.terminal = Terminal::Escaped;
            u.channel = ch;
            break;
        }
    }
    u.t_end = t;
    return u;
}

BounceSequence fold(const Table& table, const Unfolding& u)
{
    (void)table;
    BounceSequence seq;
    seq.start = u.start;
    seq.chi0 = wrap_angle(std::arg(u.dir));
    seq.start_side = u.start_side;
    for (size_t k = 0; k < u.cross_t.size(); ++k) {
        Isometry Ti = u.copies[k].inverse();
        Isometry Ni = u.copies[k + 1].inverse();
        cdouble hit = Ti.apply(u.start + u.cross_t[k] * u.dir);
        double chi = wrap_angle(std::arg(Ni.linear(u.dir)));
        seq.bounces.push_back({static_cast<long>(k + 1), u.cross_t[k], u.cross_side[k], hit, chi});
    }
    seq.terminal = u.terminal;
    seq.corner = u.corner;
    seq.channel = u.channel;
    seq.t_end = u.t_end;
    Isometry Li = u.copies.back().inverse();
    seq.final_pos = Li.apply(u.start + u.t_end * u.dir);
    seq.final_chi = wrap_angle(std::arg(Li.linear(u.dir)));
    return seq;
}

bool same_sequence(const BounceSequence& a, const BounceSequence& b, double tol, const Table& table)
{
    if (a.bounces.size() != b.bounces.size() || a.terminal != b.terminal)
        return false;
    if (a.corner != b.corner || a.channel != b.channel)
        return false;
    double D = table.diameter();
    for (size_t k = 0; k < a.bounces.size(); ++k) {
        const Bounce &x = a.bounces[k], &y = b.bounces[k];
        if (x.side != y.side)
            return false;
        if (std::abs(x.hit - y.hit) > tol * D || std::abs(x.tau - y.tau) > tol * D)
            return false;
        if (angle_dist(x.chi, y.chi) > tol)
            return false;
    }
    return true;
}

namespace {

long first_return(const Table& table, const std::vector<Bounce>& bs, double tol)
{
    double D = table.diameter();
    for (size_t k = 1; k < bs.size(); ++k) {
        if (bs[k].side == bs[0].side && std::abs(bs[k].hit - bs[0].hit) < tol * D &&
            angle_dist(bs[k].chi, bs[0].chi) < tol)
            return static_cast<long>(k);
    }
    return -1;
}

bool shifted_periodic(const Table& table, const Bounce& b0, long m, double delta, double tol)
{
    const Edge& ed = table.edges()[b0.side];
    cdouble p = b0.hit + delta * ed.d;
    double s = ((p - ed.p0) * std::conj(ed.d)).real();
    if (s <= ed.s_lo || s >= ed.s_hi)
        return false;
    TraceOptions o;
    o.max_bounces = m;
    o.start_side = b0.side;
    BounceSequence sq = trace(table, p, b0.chi, o);
    if (static_cast<long>(sq.bounces.size()) < m)
        return false;
    const Bounce& r = sq.bounces[m - 1];
    return r.side == b0.side && std::abs(r.hit - p) < tol * table.diameter() && angle_dist(r.chi, b0.chi) < tol;
}

} // namespace

std::optional<Periodicity> detect_periodic(const Table& table, const BounceSequence& seq, double tol,
                                           bool check_family)
{
    const auto& bs = seq.bounces;
    if (bs.size() < 2)
        return std::nullopt;
    long m = first_return(table, bs, tol);
    if (m < 0)
        return std::nullopt;
    // the return must repeat once more when the record is long enough
    if (2 * m < static_cast<long>(bs.size())) {
        const Bounce &a = bs[m], &b = bs[2 * m];
        if (a.side != b.side || std::abs(a.hit - b.hit) > tol * table.diameter() || angle_dist(a.chi, b.chi) > tol)
            return std::nullopt;
    }
    Periodicity p;
    p.m = m;
    p.T = bs[m].tau - bs[0].tau;
    if (check_family && m % 2 == 0) {
        p.family_checked = true;
        double D = table.diameter();
        for (int k = 8; k >= 2; --k) {
            double d = D * std::pow(10.0, -k);
            if (!shifted_periodic(table, bs[0], m, d, tol) || !shifted_periodic(table, bs[0], m, -d, tol))
                break;
            p.max_shift = d;
        }
        p.family = p.max_shift > 0;
    }
    return p;
}

std::vector<double> direction_set(const BounceSequence& seq, double cluster_tol)
{
    std::vector<double> a;
    for (const auto& b : seq.bounces)
        a.push_back(wrap_angle(b.chi));
    std::vector<double> out;
    if (a.empty())
        return out;
    std::sort(a.begin(), a.end());
    std::vector<std::vector<double>> groups{{a[0]}};
    for (size_t k = 1; k < a.size(); ++k) {
        if (a[k] - groups.back().back() < cluster_tol)
            groups.back().push_back(a[k]);
        else
            groups.push_back({a[k]});
    }
    // merge across 2 pi
    if (groups.size() > 1 && a.front() + 2 * kPi - a.back() < cluster_tol) {
        for (double x : groups.back())
            groups.front().push_back(x - 2 * kPi);
        groups.pop_back();
    }
    for (const auto& g : groups) {
        double s = 0;
        for (double x : g)
            s += x;
        out.push_back(wrap_angle(s / g.size()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

BoundaryHistogram boundary_histogram(const Table& table, const BounceSequence& seq, int bins)
{
    if (!table.bounded())
        throw Error(ErrorCode::InvalidInput, "boundary histogram needs a bounded polygon");
    if (bins < 1)
        throw Error(ErrorCode::InvalidParameter, "bins must be positive");
    double P = table.perimeter();
    std::vector<double> s;
    for (const auto& b : seq.bounces) {
        const Edge& e = table.edges()[b.side];
        double x = ((b.hit - e.p0) * std::conj(e.d)).real();
        x = std::clamp(x, 0.0, table.side_length(b.side));
        s.push_back((table.perimeter_offset(b.side) + x) / P);
    }
    BoundaryHistogram h;
    h.n = static_cast<long>(s.size());
    h.density.assign(bins, 0.0);
    if (s.empty())
        return h;
    for (double x : s)
        h.density[std::min(bins - 1, static_cast<int>(x * bins))] += 1;
    for (double& d : h.density)
        d *= bins / static_cast<double>(s.size());
    std::sort(s.begin(), s.end());
    double n = static_cast<double>(s.size());
    for (size_t k = 0; k < s.size(); ++k)
        h.ks = std::max({h.ks, (k + 1) / n - s[k], s[k] - k / n});
    return h;
}

void write_bounces_csv(std::ostream& os, const BounceSequence& seq, const std::string& header)
{
    os << header;
    os << "n,tau,side,hit_re,hit_im,chi\n";
    os << std::setprecision(17);
    for (const auto& b : seq.bounces)
        os << b.n << ',' << b.tau << ',' << b.side << ',' << b.hit.real() << ',' << b.hit.imag() << ',' << b.chi
           << '\n';
}

} // namespace scb
