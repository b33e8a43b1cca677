#pragma once

// Small interval arithmetic kernel used to certify bounds of polynomials over
// boxes. Outward rounding is approximated by widening each arithmetic result by
// a few ulps, which is adequate here: intervals only ever shrink candidate
// sampling boxes, and membership of individual samples is re-checked exactly.

#include <algorithm>
#include <cmath>
#include <limits>

namespace bcert {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double a, double b) : lo(a), hi(b) {}
    static Interval point(double a) { return {a, a}; }

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double x) const { return lo <= x && x <= hi; }
};

namespace detail {
inline double down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }
inline double up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }
}  // namespace detail

inline Interval operator+(const Interval& a, const Interval& b) {
    return {detail::down(a.lo + b.lo), detail::up(a.hi + b.hi)};
}

inline Interval operator-(const Interval& a, const Interval& b) {
    return {detail::down(a.lo - b.hi), detail::up(a.hi - b.lo)};
}

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator*(const Interval& a, const Interval& b) {
    double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    double lo = c[0], hi = c[0];
    for (double v : c) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {detail::down(lo), detail::up(hi)};
}

inline Interval pow(const Interval& a, int n) {
    if (n == 0) return Interval::point(1.0);
    if (n == 1) return a;
    if (n % 2 == 0) {
        double alo = std::abs(a.lo), ahi = std::abs(a.hi);
        double m = std::max(alo, ahi);
        double lo = a.contains(0.0) ? 0.0 : std::min(alo, ahi);
        return {detail::down(std::pow(lo, n)), detail::up(std::pow(m, n))};
    }
    return {detail::down(std::pow(a.lo, n)), detail::up(std::pow(a.hi, n))};
}

inline Interval scale(const Interval& a, double c) {
    return c >= 0 ? Interval{detail::down(c * a.lo), detail::up(c * a.hi)}
                  : Interval{detail::down(c * a.hi), detail::up(c * a.lo)};
}

}  // namespace bcert
