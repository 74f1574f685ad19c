#pragma once

#include "scb/number.hpp"
#include "scb/sc_map.hpp"

#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace scb {

// One side as a parametrized piece of line p0 + s d, s in [s_lo, s_hi];
// infinite bounds describe the rays of unbounded polygons.
struct Edge {
    cdouble p0;
    cdouble d;  // unit direction
    double s_lo = 0, s_hi = 0;
    int side = 0;
};

// Channel at a vertex at infinity: two walls and the segment closing it off.
struct Channel {
    int vertex = 0;
    bool has_seal = false;
    cdouble seal_a, seal_b;
    int outward_sign = 1;      // orientation of far points relative to the seal
    cdouble out1, out2;        // outward wall directions
    bool parallel = false;
};

class Table {
public:
    explicit Table(const Polygon& poly);
    // closed polygon from counterclockwise vertices (used for test shapes)
    static Table from_vertices(const std::vector<cdouble>& v);

    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<cdouble>& vertices() const { return verts_; }
    const std::vector<bool>& at_infinity() const { return inf_; }
    const std::vector<Channel>& channels() const { return channels_; }
    bool bounded() const { return channels_.empty(); }
    double diameter() const { return diam_; }
    int sides() const { return static_cast<int>(edges_.size()); }
    double side_angle(int a) const { return std::arg(edges_[a].d); }
    double side_length(int a) const { return edges_[a].s_hi - edges_[a].s_lo; }
    // arclength offset of the start of side a along the perimeter
    double perimeter_offset(int a) const;
    double perimeter() const;

private:
    Table() = default;
    void finish();
    std::vector<Edge> edges_;
    std::vector<cdouble> verts_;
    std::vector<bool> inf_;
    std::vector<Channel> channels_;
    double diam_ = 0;
};

struct Bounce {
    long n = 0;
    double tau = 0;
    int side = 0;
    cdouble hit;
    double chi = 0;  // phase after the reflection
};

enum class Terminal { Running, CornerHit, Escaped };
const char* terminal_name(Terminal t);

struct BounceSequence {
    cdouble start;
    double chi0 = 0;
    int start_side = -1;
    std::vector<Bounce> bounces;
    Terminal terminal = Terminal::Running;
    int corner = -1;     // vertex index for CornerHit
    int channel = -1;    // vertex index of the channel for Escaped
    double t_end = 0;    // time reached (or of the corner hit / escape)
    cdouble final_pos;
    double final_chi = 0;
};

struct TraceOptions {
    double t_max = std::numeric_limits<double>::infinity();
    long max_bounces = 1000;
    double corner_eps = -1;  // < 0: 1e-9 times the diameter
    int start_side = -1;     // side the launch point lies on, if any
};

BounceSequence trace(const Table& table, cdouble p0, double chi0, const TraceOptions& opt);

// z -> a z + b, or a conj(z) + b when flip is set
struct Isometry {
    cdouble a = 1, b = 0;
    bool flip = false;
    cdouble apply(const cdouble& z) const { return a * (flip ? std::conj(z) : z) + b; }
    cdouble linear(const cdouble& v) const { return a * (flip ? std::conj(v) : v); }
    Isometry inverse() const;
    Isometry then(const Isometry& outer) const;  // outer o this
    static Isometry reflection(const cdouble& p0, const cdouble& d);
};

// Straight-line picture: copies[k] maps the original polygon onto the k-th
// reflected copy; the orbit is start + t dir in the unfolded plane.
struct Unfolding {
    cdouble start;
    cdouble dir;
    int start_side = -1;
    std::vector<Isometry> copies;
    std::vector<double> cross_t;
    std::vector<int> cross_side;
    Terminal terminal = Terminal::Running;
    int corner = -1;
    int channel = -1;
    double t_end = 0;
};

Unfolding unfold(const Table& table, cdouble p0, double chi0, const TraceOptions& opt);
BounceSequence fold(const Table& table, const Unfolding& u);

// bounce sequences equal to within tol (positions relative to the diameter)
bool same_sequence(const BounceSequence& a, const BounceSequence& b, double tol, const Table& table);

struct Periodicity {
    long m = 0;       // bounces per period
    double T = 0;     // period in time
    bool family_checked = false;
    bool family = false;
    double max_shift = 0;
};

std::optional<Periodicity> detect_periodic(const Table& table, const BounceSequence& seq, double tol,
                                           bool check_family = true);

// cluster post-bounce phases on the circle
std::vector<double> direction_set(const BounceSequence& seq, double cluster_tol);

struct BoundaryHistogram {
    std::vector<double> density;  // normalized per unit arclength fraction
    double ks = 0;                // sup |F_emp - s/P|
    long n = 0;
};
BoundaryHistogram boundary_histogram(const Table& table, const BounceSequence& seq, int bins);

void write_bounces_csv(std::ostream& os, const BounceSequence& seq, const std::string& header = "");

// angle wrapped to [0, 2 pi)
double wrap_angle(double a);
// |a - b| on the circle
double angle_dist(double a, double b);

} // namespace scb
