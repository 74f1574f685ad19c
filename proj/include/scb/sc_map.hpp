#pragma once

#include "scb/number.hpp"
#include "scb/system.hpp"

#include "json.hpp"

#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace scb {

// n-point Gauss-Jacobi rule for the weight (1-x)^alpha (1+x)^beta on [-1, 1]
struct QuadRule {
    std::vector<double> x, w;
};
QuadRule gauss_jacobi(int n, double alpha, double beta);

struct Polygon {
    // v_a = Phi(u_a); entries with at_infinity set carry NaN
    std::vector<cdouble> vertices;
    std::vector<bool> at_infinity;
    // interior angles mu_a * pi
    std::vector<double> angles;
    // direction of side S_a (from v_a toward v_a+1), constant arg Phi' on I_a
    std::vector<double> side_dir;
    // a point on each side: Phi at the middle of I_a, Phi_inf for the last side
    std::vector<cdouble> side_points;
    bool bounded = true;
    cdouble phi_inf;
    cdouble base_point;
    // largest distance between finite vertices and phi_inf
    double diameter = 0;

    int sides() const { return static_cast<int>(vertices.size()); }
    // endpoints of side a (finite sides only)
    std::pair<cdouble, cdouble> side(int a) const;
    // interior angles measured from adjacent side directions
    std::vector<double> measured_angles() const;
    // closed-polygon inclusion test for bounded polygons
    bool contains(const cdouble& w, double tol = 0) const;
    double perimeter() const;
    nlohmann::json to_json() const;
};

// Phi(u) = int_{u(0)}^u prod (s-u_a)^(mu_a-1) ds on the closed upper half plane.
class ScMap {
public:
    explicit ScMap(const BilliardSpec& spec, cdouble base = cdouble(0, 1));

    const BilliardSpec& spec() const { return spec_; }
    const Polygon& polygon() const { return poly_; }
    cdouble base_point() const { return base_; }
    cdouble phi_inf() const { return poly_.phi_inf; }

    // principal branches, real u read as u + i0
    cdouble derivative(const cdouble& u) const;
    cdouble eval(const cdouble& u) const;
    // Newton inverse seeded from a grid; throws NoConvergence or OutsidePolygon
    cdouble inverse(const cdouble& w) const;
    // Newton polish from a caller supplied seed; returns false if it stalls
    bool inverse_from(const cdouble& w, cdouble& u, int max_iter = 60) const;

    // integral of Phi' along the straight segment a -> b; an endpoint equal
    // to a prevertex is flagged by its index (else -1)
    cdouble segment_integral(const cdouble& a, const cdouble& b, int sa, int sb) const;

    int prevertex_count() const { return n_; }
    double big_radius() const { return R_; }

private:
    cdouble F(const cdouble& u) const;   // integral from u_ref
    cdouble G(const cdouble& s) const;   // prod (1 - u_a s)^(mu_a - 1)
    cdouble tail(const cdouble& v) const; // int_0^v G
    cdouble panel(const cdouble& a, const cdouble& b, int sa, int sb, int depth) const;
    void build_grid() const;

    BilliardSpec spec_;
    int n_ = 0;
    std::vector<double> mu_, u_, e_;
    cdouble ref_, base_;
    cdouble F_base_, F_inf_;
    double U_ = 1, R_ = 4;
    Polygon poly_;
    QuadRule leg_;
    std::vector<QuadRule> jac_;  // exponent mu_a - 1 at the singular end

    struct Grid {
        std::once_flag once;
        std::vector<std::pair<cdouble, cdouble>> pts;  // (u, Phi(u))
    };
    std::shared_ptr<Grid> grid_ = std::make_shared<Grid>();
};

cdouble sc_derivative(const BilliardSpec& spec, const cdouble& u);
cdouble sc_eval(const BilliardSpec& spec, const cdouble& u, cdouble base = cdouble(0, 1));
Polygon vertices(const BilliardSpec& spec, cdouble base = cdouble(0, 1));
cdouble phi_infinity(const BilliardSpec& spec, cdouble base = cdouble(0, 1));
cdouble sc_inverse(const ScMap& map, const cdouble& w);

// u + i0 principal argument
double arg_plus(const cdouble& z);

} // namespace scb
