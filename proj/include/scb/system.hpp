#pragma once

#include "scb/number.hpp"
#include "scb/poly.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scb {

// Angles mu_a (in units of pi) and prevertices u_a of one polygon.
struct BilliardSpec {
    int r = 2;
    std::vector<Number> mu;
    std::vector<Number> u;

    bool bounded() const;
    bool exact() const;
    // throws InvalidSpec when an invariant is violated
    void validate() const;

    std::vector<double> mu_d() const;
    std::vector<double> u_d() const;
    std::vector<quad> mu_q() const;
    std::vector<quad> u_q() const;

    // stable text form; also the input of spec_hash
    std::string canonical() const;
};

BilliardSpec make_spec(int r, std::vector<Number> mu, std::vector<Number> u);

// u_a = a - 1/2 - floor(r/2)
std::vector<Number> default_prevertices(int r);

// Two homogeneous degree-r polynomials: p[j] and q[j] multiply x1^j x2^(r-j),
// so P(u) = p(u,1) and Q(u) = q(u,1) have the same ascending coefficients.
struct ODESystem {
    int r = 2;
    std::vector<Number> p;
    std::vector<Number> q;

    Polynomial P() const { return Polynomial(p); }
    Polynomial Q() const { return Polynomial(q); }
    // S = u Q - P
    Polynomial S() const;
    std::string str() const;
};

ODESystem build_system(const BilliardSpec& spec);
BilliardSpec recover_spec(const ODESystem& sys);

// x1' = x1 x2, x2' = x1^2 + 2/(1-k) x2^2
ODESystem newtonian_system(const Number& k);

struct InitialCondition {
    cquad u0;
    quad chi0 = 0;
    cquad x1;
    cquad x2;
};

// x2 = -e^{i chi0} prod (u0-u_a)^{-mu_a/(r-1)}, x1 = u0 x2
InitialCondition state_from(const BilliardSpec& spec, const cquad& u0, const quad& chi0);

// rescale (x1, x2) by a positive real so that |C| = 1 and read off chi0 = arg(-C)
InitialCondition normalize_initial(const BilliardSpec& spec, const cquad& x1, const cquad& x2);

// C = x2 prod (u-u_a)^{mu_a/(r-1)}, principal branches with real u read as u+i0
cquad conserved_C(const BilliardSpec& spec, const cquad& x1, const cquad& x2);

// |C| = prod |x1 - u_a x2|^{mu_a/(r-1)}, branch free
template <class Real>
Real abs_C(const std::vector<Real>& mu, const std::vector<Real>& u, int r,
           const std::complex<Real>& x1, const std::complex<Real>& x2)
{
    using std::abs;
    using std::log;
    using std::exp;
    Real s = 0;
    for (size_t a = 0; a < mu.size(); ++a)
        s += mu[a] * log(abs(x1 - u[a] * x2));
    return exp(s / Real(r - 1));
}

// ODE phase chi0 whose billiard direction is e^{i chi_b}, i.e. -C^(r-1) = e^{i chi_b}
quad phase_for_direction(int r, const quad& chi_b);
// billiard direction angle for an ODE phase chi0
quad direction_for_phase(int r, const quad& chi0);

// chi0 launching perpendicular to the side that contains the real point u0
quad perpendicular_phase(const BilliardSpec& spec, const quad& u0);

// spec files
struct SpecFile {
    BilliardSpec spec;
    std::optional<cquad> u0;
    std::optional<quad> chi0;
};

nlohmann::json number_to_json(const Number& x);
Number number_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const BilliardSpec& spec);
SpecFile spec_file_from_json(const nlohmann::json& j);
nlohmann::json spec_file_to_json(const SpecFile& f);

// short hex digest of the canonical spec text
std::string spec_hash(const BilliardSpec& spec);

const quad& pi_q();

} // namespace scb
