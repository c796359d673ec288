#ifndef CASCADE_LAB_RATIONAL_HPP
#define CASCADE_LAB_RATIONAL_HPP

#include <boost/multiprecision/gmp.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

#include "cascade_lab/errors.hpp"

namespace cascade_lab {

using Rational = boost::multiprecision::mpq_rational;
using BigInt = boost::multiprecision::mpz_int;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(double x) { return x; }

/// Parses "7", "-3/10", "0.35", "2.5e-3" into an exact rational. Decimal
/// notation is read as the exact decimal fraction it denotes.
inline Rational parse_rational(std::string_view text) {
    auto fail = [&] { return ArgumentError("not a rational number: '" + std::string(text) + "'"); };
    if (text.empty()) throw fail();

    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        Rational num = parse_rational(text.substr(0, slash));
        Rational den = parse_rational(text.substr(slash + 1));
        if (den == 0) throw fail();
        return num / den;
    }

    std::size_t pos = 0;
    bool negative = false;
    if (text[pos] == '+' || text[pos] == '-') {
        negative = text[pos] == '-';
        ++pos;
    }
    BigInt mantissa = 0;
    long exponent = 0;
    bool any_digit = false;
    bool seen_point = false;
    for (; pos < text.size(); ++pos) {
        char c = text[pos];
        if (c >= '0' && c <= '9') {
            mantissa = mantissa * 10 + (c - '0');
            if (seen_point) --exponent;
            any_digit = true;
        } else if (c == '.' && !seen_point) {
            seen_point = true;
        } else {
            break;
        }
    }
    if (!any_digit) throw fail();
    if (pos < text.size()) {
        if (text[pos] != 'e' && text[pos] != 'E') throw fail();
        ++pos;
        long e = 0;
        std::string_view rest = text.substr(pos);
        if (!rest.empty() && rest.front() == '+') rest.remove_prefix(1);
        auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), e);
        if (ec != std::errc() || ptr != rest.data() + rest.size()) throw fail();
        exponent += e;
    }
    Rational value(mantissa);
    BigInt ten_pow = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::labs(exponent)));
    if (exponent >= 0) {
        value *= Rational(ten_pow);
    } else {
        value /= Rational(ten_pow);
    }
    return negative ? Rational(-value) : value;
}

/// Shortest round-trip decimal of a double, read back as an exact rational.
/// 0.3 becomes 3/10, not the nearest binary fraction.
inline Rational rational_from_double(double x) {
    if (!std::isfinite(x)) throw ArgumentError("non-finite number");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return parse_rational(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

/// Converts an exact rational into the requested scalar mode.
template <class Scalar>
Scalar as_scalar(const Rational& q) {
    if constexpr (std::is_same_v<Scalar, Rational>) {
        return q;
    } else {
        return to_double(q);
    }
}

inline std::string to_string(const Rational& r) { return r.str(); }

/// Exact power for a nonnegative integer exponent.
template <class Scalar>
Scalar ipow(const Scalar& base, unsigned exponent) {
    Scalar result(1);
    Scalar b(base);
    while (exponent) {
        if (exponent & 1u) result *= b;
        exponent >>= 1u;
        if (exponent) b *= b;
    }
    return result;
}

/// True when q is (numerically) an integer; fractional powers of rationals
/// are taken in double precision only at the final step.
inline bool is_integer_exponent(double q) { return std::floor(q) == q; }

/// Natural log of a positive rational without underflow for tiny values.
inline double log_rational(const Rational& r) {
    if (r <= 0) throw ArgumentError("log of a nonpositive rational");
    auto log_z = [](const BigInt& z) {
        long exp = 0;
        double mant = mpz_get_d_2exp(&exp, z.backend().data());
        return std::log(mant) + static_cast<double>(exp) * std::log(2.0);
    };
    return log_z(boost::multiprecision::numerator(r)) - log_z(boost::multiprecision::denominator(r));
}

inline double real_pow(const Rational& base, double q) {
    return std::pow(to_double(base), q);
}

} // namespace cascade_lab

#endif // CASCADE_LAB_RATIONAL_HPP
