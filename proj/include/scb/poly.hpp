#pragma once

#include "scb/number.hpp"

#include <vector>

namespace scb {

// One-variable polynomial with real coefficients in ascending degree.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<Number> coeffs);

    const std::vector<Number>& coeffs() const { return c_; }
    // degree of the zero polynomial is reported as 0
    int degree() const { return c_.empty() ? 0 : static_cast<int>(c_.size()) - 1; }
    bool is_zero() const { return c_.empty(); }
    bool exact() const;
    bool monic() const;
    Number leading() const;
    Number coeff(int k) const;

    Number eval(const Number& x) const;
    cquad eval(const cquad& z) const;
    cdouble eval(const cdouble& z) const;

    Polynomial derivative() const;

    Polynomial operator-() const;
    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Number& s, const Polynomial& p);
    friend bool operator==(const Polynomial& a, const Polynomial& b);

    // u * p(u)
    Polynomial shift_up() const;

    std::string str(const std::string& var = "u") const;

private:
    void trim();
    std::vector<Number> c_;
};

// monic polynomial with the given simple roots
Polynomial poly_from_roots(const std::vector<Number>& roots);

// residues mu_a = (r-1) Q(u_a) / S'(u_a) where S has the given simple roots
std::vector<Number> partial_fraction_weights(const Polynomial& Q, const std::vector<Number>& roots, int r);

// all complex roots by Aberth iteration followed by Newton polishing in quad
std::vector<cquad> complex_roots(const Polynomial& p);

} // namespace scb
