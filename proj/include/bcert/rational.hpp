#pragma once

// Exact rational coefficient type for the symbolic layer. Floating point
// enters only when a problem is lowered to the numeric SDP solver.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bcert {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Parses an integer, decimal (exponent allowed), or a/b literal into an exact
/// rational. "0.25" -> 1/4, "-3" -> -3, "2/7" -> 2/7, "1e-17" -> 1/10^17.
/// Throws std::invalid_argument.
inline Rational rational_from_string(std::string_view text) {
    auto fail = [&] {
        throw std::invalid_argument("not a rational literal: '" + std::string(text) + "'");
    };
    if (text.empty()) fail();
    bool negative = false;
    std::size_t pos = 0;
    if (text[0] == '+' || text[0] == '-') {
        negative = text[0] == '-';
        pos = 1;
    }
    auto slash = text.find('/', pos);
    if (slash != std::string_view::npos) {
        Rational num = rational_from_string(text.substr(0, slash));
        Rational den = rational_from_string(text.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("division by zero in rational literal");
        return num / den;
    }
    BigInt integer = 0, frac = 0;
    BigInt scale = 1;
    bool any_digit = false;
    auto digits_end = [&](char c) { return c == '.' || c == 'e' || c == 'E'; };
    for (; pos < text.size() && !digits_end(text[pos]); ++pos) {
        if (text[pos] < '0' || text[pos] > '9') fail();
        integer = integer * 10 + (text[pos] - '0');
        any_digit = true;
    }
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        for (; pos < text.size() && text[pos] != 'e' && text[pos] != 'E'; ++pos) {
            if (text[pos] < '0' || text[pos] > '9') fail();
            frac = frac * 10 + (text[pos] - '0');
            scale *= 10;
            any_digit = true;
        }
    }
    if (!any_digit) fail();
    Rational value = Rational(integer) + Rational(frac, scale);
    if (pos < text.size()) {  // exponent suffix
        ++pos;
        bool eneg = false;
        if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
            eneg = text[pos] == '-';
            ++pos;
        }
        if (pos == text.size()) fail();
        long e = 0;
        for (; pos < text.size(); ++pos) {
            if (text[pos] < '0' || text[pos] > '9') fail();
            e = e * 10 + (text[pos] - '0');
            if (e > 100000) fail();
        }
        BigInt p = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(e));
        value = eneg ? value / Rational(p) : value * Rational(p);
    }
    return negative ? -value : value;
}

/// Exact rational from a double (the double's binary value, not its decimal print).
inline Rational rational_from_double(double x) {
    if (x != x) throw std::invalid_argument("NaN has no rational value");
    Rational r(x);
    return r;
}

}  // namespace bcert
