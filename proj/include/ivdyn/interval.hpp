#ifndef IVDYN_INTERVAL_HPP
#define IVDYN_INTERVAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

// Outward-rounded interval arithmetic in double precision. Each operation is
// computed in round-to-nearest and widened by one ulp only when an error-free
// transformation shows the result was inexact, so exact values stay exact.

namespace ivdyn {

namespace rnd {

inline double down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }
inline double up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }

inline double add_err(double a, double b, double s) {
    double bb = s - a;
    return (a - (s - bb)) + (b - bb);
}

inline double add_down(double a, double b) {
    double s = a + b;
    if (!std::isfinite(s)) return s;
    return add_err(a, b, s) < 0 ? down(s) : s;
}
inline double add_up(double a, double b) {
    double s = a + b;
    if (!std::isfinite(s)) return s;
    return add_err(a, b, s) > 0 ? up(s) : s;
}
inline double sub_down(double a, double b) { return add_down(a, -b); }
inline double sub_up(double a, double b) { return add_up(a, -b); }

inline double mul_down(double a, double b) {
    double p = a * b;
    if (!std::isfinite(p)) return p;
    double e = std::fma(a, b, -p);
    if (e < 0) return down(p);
    if (e == 0 && p == 0 && a != 0 && b != 0) return (a < 0) != (b < 0) ? down(p) : p;
    return p;
}
inline double mul_up(double a, double b) {
    double p = a * b;
    if (!std::isfinite(p)) return p;
    double e = std::fma(a, b, -p);
    if (e > 0) return up(p);
    if (e == 0 && p == 0 && a != 0 && b != 0) return (a < 0) != (b < 0) ? p : up(p);
    return p;
}

inline double div_down(double a, double b) {
    double q = a / b;
    if (!std::isfinite(q)) return q;
    double r = -std::fma(q, b, -a); // a - q*b
    if (r == 0) return q;
    return ((r > 0) == (b > 0)) ? q : down(q);
}
inline double div_up(double a, double b) {
    double q = a / b;
    if (!std::isfinite(q)) return q;
    double r = -std::fma(q, b, -a);
    if (r == 0) return q;
    return ((r > 0) == (b > 0)) ? up(q) : q;
}

} // namespace rnd

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    constexpr Interval() = default;
    constexpr Interval(double a, double b) : lo(a), hi(b) {}
    static constexpr Interval point(double x) { return {x, x}; }

    double width() const { return hi - lo; }
    double mid() const { return lo + 0.5 * (hi - lo); }
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
    bool interior_contains(double x) const { return lo < x && x < hi; }
    bool intersects(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
    bool degenerate() const { return lo == hi; }
};

inline Interval hull(const Interval& a, const Interval& b) {
    return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline Interval operator+(const Interval& a, const Interval& b) {
    return {rnd::add_down(a.lo, b.lo), rnd::add_up(a.hi, b.hi)};
}
inline Interval operator-(const Interval& a, const Interval& b) {
    return {rnd::sub_down(a.lo, b.hi), rnd::sub_up(a.hi, b.lo)};
}
inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator*(const Interval& a, const Interval& b) {
    if (a.degenerate() && b.degenerate())
        return {rnd::mul_down(a.lo, b.lo), rnd::mul_up(a.lo, b.lo)};
    double l = std::min({rnd::mul_down(a.lo, b.lo), rnd::mul_down(a.lo, b.hi),
                         rnd::mul_down(a.hi, b.lo), rnd::mul_down(a.hi, b.hi)});
    double h = std::max({rnd::mul_up(a.lo, b.lo), rnd::mul_up(a.lo, b.hi),
                         rnd::mul_up(a.hi, b.lo), rnd::mul_up(a.hi, b.hi)});
    return {l, h};
}

// Division by an interval not containing zero.
inline Interval operator/(const Interval& a, const Interval& b) {
    double l = std::min({rnd::div_down(a.lo, b.lo), rnd::div_down(a.lo, b.hi),
                         rnd::div_down(a.hi, b.lo), rnd::div_down(a.hi, b.hi)});
    double h = std::max({rnd::div_up(a.lo, b.lo), rnd::div_up(a.lo, b.hi),
                         rnd::div_up(a.hi, b.lo), rnd::div_up(a.hi, b.hi)});
    return {l, h};
}

// Power of a nonnegative interval with real exponent alpha >= 1. std::pow is not
// correctly rounded, so non-integer exponents are widened by two ulps.
inline Interval pow_nonneg(Interval base, double alpha) {
    base.lo = std::max(base.lo, 0.0);
    base.hi = std::max(base.hi, 0.0);
    if (alpha == 1.0) return base;
    double ia;
    if (std::modf(alpha, &ia) == 0.0 && ia <= 16) {
        Interval r = base;
        for (int k = 1; k < static_cast<int>(ia); ++k) r = r * base;
        r.lo = std::max(r.lo, 0.0);
        return r;
    }
    double l = std::pow(base.lo, alpha), h = std::pow(base.hi, alpha);
    l = l > 0 ? rnd::down(rnd::down(l)) : 0.0;
    h = (base.hi == 0) ? 0.0 : rnd::up(rnd::up(h));
    return {std::max(l, 0.0), h};
}

inline std::ostream& operator<<(std::ostream& os, const Interval& x) {
    return os << '[' << x.lo << ", " << x.hi << ']';
}

} // namespace ivdyn

#endif
