#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/float128.hpp>

#include <complex>
#include <optional>
#include <string>

namespace scb {

using Rational = boost::multiprecision::cpp_rational;
using quad = boost::multiprecision::float128;
using cquad = std::complex<quad>;
using cdouble = std::complex<double>;

// A real number carried exactly when it is rational, and as a quad float
// otherwise.  Arithmetic stays exact as long as every operand is exact.
class Number {
public:
    Number() : q_(Rational(0)), v_(0) {}
    Number(int x) : q_(Rational(x)), v_(x) {}
    Number(long long x) : q_(Rational(x)), v_(x) {}
    Number(const Rational& x);
    static Number approx(const quad& x);
    static Number approx(double x) { return approx(quad(x)); }

    // "p/q", "p", or a decimal literal; decimals are read exactly
    static Number parse(const std::string& s);

    bool exact() const { return q_.has_value(); }
    const Rational& rational() const;
    const quad& value() const { return v_; }
    double to_double() const { return static_cast<double>(v_); }

    // exact numbers print as "p/q" (or "p"), others as a 36-digit decimal
    std::string str() const;

    Number operator-() const;
    Number& operator+=(const Number& o);
    Number& operator-=(const Number& o);
    Number& operator*=(const Number& o);
    Number& operator/=(const Number& o);

    friend Number operator+(Number a, const Number& b) { return a += b; }
    friend Number operator-(Number a, const Number& b) { return a -= b; }
    friend Number operator*(Number a, const Number& b) { return a *= b; }
    friend Number operator/(Number a, const Number& b) { return a /= b; }

    // exact comparison when both sides are exact, value comparison otherwise
    friend bool operator==(const Number& a, const Number& b);
    friend bool operator<(const Number& a, const Number& b);
    friend bool operator>(const Number& a, const Number& b) { return b < a; }
    friend bool operator<=(const Number& a, const Number& b) { return !(b < a); }
    friend bool operator>=(const Number& a, const Number& b) { return !(a < b); }

    bool is_zero() const;

private:
    std::optional<Rational> q_;
    quad v_;
};

quad to_quad(const Rational& q);

// best rational approximation with denominator at most max_den
Rational rationalize(const quad& x, long long max_den);

// floor of a real number as an integer (works for both representations)
long long floor_int(const Number& x);

} // namespace scb
