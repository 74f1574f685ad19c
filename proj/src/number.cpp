#include "scb/number.hpp"
#include "scb/error.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace scb {

using boost::multiprecision::cpp_int;

quad to_quad(const Rational& q)
{
    const cpp_int& n = boost::multiprecision::numerator(q);
    const cpp_int& d = boost::multiprecision::denominator(q);
    return n.convert_to<quad>() / d.convert_to<quad>();
}

Number::Number(const Rational& x) : q_(x), v_(to_quad(x)) {}

Number Number::approx(const quad& x)
{
    Number n;
    n.q_.reset();
    n.v_ = x;
    return n;
}

const Rational& Number::rational() const
{
    if (!q_)
        throw Error(ErrorCode::InvalidInput, "number " + str() + " has no exact value");
    return *q_;
}

namespace {

bool is_int_literal(const std::string& s)
{
    size_t i = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
    if (i >= s.size())
        return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            return false;
    return true;
}

cpp_int parse_int(const std::string& s)
{
    if (!is_int_literal(s))
        throw Error(ErrorCode::InvalidInput, "bad integer '" + s + "'");
    bool neg = s[0] == '-';
    std::string t = (s[0] == '+' || s[0] == '-') ? s.substr(1) : s;
    // leading zeros would select octal in the cpp_int string constructor
    size_t nz = t.find_first_not_of('0');
    t = nz == std::string::npos ? std::string("0") : t.substr(nz);
    cpp_int v(t);
    return neg ? cpp_int(-v) : v;
}

// decimal with optional fraction and exponent, read exactly
Rational parse_decimal(const std::string& s)
{
    std::string mant = s, ex;
    auto epos = s.find_first_of("eE");
    if (epos != std::string::npos) {
        mant = s.substr(0, epos);
        ex = s.substr(epos + 1);
    }
    bool neg = false;
    if (!mant.empty() && (mant[0] == '-' || mant[0] == '+')) {
        neg = mant[0] == '-';
        mant = mant.substr(1);
    }
    auto dot = mant.find('.');
    std::string ip = mant.substr(0, dot), fp;
    if (dot != std::string::npos)
        fp = mant.substr(dot + 1);
    if (ip.empty() && fp.empty())
        throw Error(ErrorCode::InvalidInput, "bad number '" + s + "'");
    std::string digits = ip + fp;
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw Error(ErrorCode::InvalidInput, "bad number '" + s + "'");
    long long e = ex.empty() ? 0 : std::stoll(ex);
    e -= static_cast<long long>(fp.size());
    if (e < -4000 || e > 4000)
        throw Error(ErrorCode::InvalidInput, "exponent out of range in '" + s + "'");
    size_t nz = digits.find_first_not_of('0');
    digits = nz == std::string::npos ? std::string("0") : digits.substr(nz);
    cpp_int n(digits);
    cpp_int p = boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(e < 0 ? -e : e));
    Rational r = e < 0 ? Rational(n, p) : Rational(n * p);
    return neg ? Rational(-r) : r;
}

} // namespace

Number Number::parse(const std::string& raw)
{
    std::string s;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c)))
            s += c;
    if (s.empty())
        throw Error(ErrorCode::InvalidInput, "empty number");
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        cpp_int p = parse_int(s.substr(0, slash));
        cpp_int q = parse_int(s.substr(slash + 1));
        if (q == 0)
            throw Error(ErrorCode::InvalidInput, "zero denominator in '" + s + "'");
        if (q < 0) {
            p = -p;
            q = -q;
        }
        return Number(Rational(p, q));
    }
    if (is_int_literal(s))
        return Number(Rational(parse_int(s)));
    return Number(parse_decimal(s));
}

std::string Number::str() const
{
    if (q_) {
        std::ostringstream os;
        os << boost::multiprecision::numerator(*q_);
        if (boost::multiprecision::denominator(*q_) != 1)
            os << "/" << boost::multiprecision::denominator(*q_);
        return os.str();
    }
    std::ostringstream os;
    os.precision(36);
    os << v_;
    return os.str();
}

Number Number::operator-() const
{
    if (q_)
        return Number(Rational(-*q_));
    return approx(-v_);
}

Number& Number::operator+=(const Number& o)
{
    if (q_ && o.q_)
        *this = Number(*q_ + *o.q_);
    else
        *this = approx(v_ + o.v_);
    return *this;
}

Number& Number::operator-=(const Number& o)
{
    if (q_ && o.q_)
        *this = Number(*q_ - *o.q_);
    else
        *this = approx(v_ - o.v_);
    return *this;
}

Number& Number::operator*=(const Number& o)
{
    if (q_ && o.q_)
        *this = Number(*q_ * *o.q_);
    else
        *this = approx(v_ * o.v_);
    return *this;
}

Number& Number::operator/=(const Number& o)
{
    if (o.is_zero())
        throw Error(ErrorCode::InvalidInput, "division by zero");
    if (q_ && o.q_)
        *this = Number(Rational(*q_ / *o.q_));
    else
        *this = approx(v_ / o.v_);
    return *this;
}

bool operator==(const Number& a, const Number& b)
{
    if (a.q_ && b.q_)
        return *a.q_ == *b.q_;
    return a.v_ == b.v_;
}

bool operator<(const Number& a, const Number& b)
{
    if (a.q_ && b.q_)
        return *a.q_ < *b.q_;
    return a.v_ < b.v_;
}

bool Number::is_zero() const
{
    return q_ ? *q_ == 0 : v_ == 0;
}

Rational rationalize(const quad& x, long long max_den)
{
    // continued fraction convergents
    quad y = x;
    cpp_int h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    for (int it = 0; it < 64; ++it) {
        quad a = boost::multiprecision::floor(y);
        cpp_int ai = a.convert_to<cpp_int>();
        cpp_int h2 = ai * h1 + h0, k2 = ai * k1 + k0;
        if (k2 > max_den)
            break;
        h0 = h1; h1 = h2; k0 = k1; k1 = k2;
        quad frac = y - a;
        if (frac < quad(1e-30))
            break;
        y = 1 / frac;
    }
    if (k1 == 0)
        return Rational(x.convert_to<cpp_int>());
    return Rational(h1, k1);
}

long long floor_int(const Number& x)
{
    if (x.exact()) {
        const Rational& q = x.rational();
        cpp_int n = boost::multiprecision::numerator(q), d = boost::multiprecision::denominator(q);
        cpp_int f = n / d;
        if (n < 0 && f * d != n)
            f -= 1;
        return f.convert_to<long long>();
    }
    return static_cast<long long>(boost::multiprecision::floor(x.value()));
}

} // namespace scb
