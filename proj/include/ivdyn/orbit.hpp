#ifndef IVDYN_ORBIT_HPP
#define IVDYN_ORBIT_HPP

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "map.hpp"

namespace ivdyn {

struct Rational {
    std::int64_t p = 0;
    std::int64_t q = 1;

    double value() const { return static_cast<double>(p) / static_cast<double>(q); }
    friend bool operator==(const Rational& a, const Rational& b) {
        return static_cast<__int128>(a.p) * b.q == static_cast<__int128>(b.p) * a.q;
    }
};

inline Rational make_rational(std::int64_t p, std::int64_t q) {
    if (q <= 0) fail(ErrorCode::PreconditionFailed, "rational denominator must be positive");
    std::int64_t g = std::gcd(p < 0 ? -p : p, q);
    if (g > 1) { p /= g; q /= g; }
    return {p, q};
}

// Starting point of an orbit. A rational seed is followed exactly on integer-affine maps.
struct Seed {
    double x = 0.0;
    std::optional<Rational> exact;

    Seed() = default;
    Seed(double v) : x(v) {}
    Seed(Rational r) : x(r.value()), exact(r) {}
};

enum class Termination { HorizonReached, CriticalTruncation, NumericallyDegenerate };

inline const char* to_string(Termination t) {
    switch (t) {
    case Termination::HorizonReached: return "HorizonReached";
    case Termination::CriticalTruncation: return "CriticalTruncation";
    case Termination::NumericallyDegenerate: return "NumericallyDegenerate";
    }
    return "?";
}

struct OrbitEnd {
    Termination kind = Termination::HorizonReached;
    std::size_t step = 0;  // index of the last recorded point
    double critical = 0.0; // the critical point hit, for CriticalTruncation
};

class OrbitStream {
public:
    // continue_through_critical defaults to on for continuous maps; it is
    // forced off whenever the critical point hit is a discontinuity.
    OrbitStream(const PiecewiseMap& f, const Seed& s, std::optional<bool> continue_through_critical = std::nullopt)
        : f_(&f), x_(s.x), cont_(continue_through_critical.value_or(f.is_continuous())) {
        if (!(s.x >= 0.0 && s.x <= 1.0)) fail(ErrorCode::PreconditionFailed, "orbit seed outside [0,1]");
        if (s.exact && f.integer_affine()) {
            exact_ = true;
            r_ = *s.exact;
            if (r_.p < 0 || r_.p > r_.q) fail(ErrorCode::PreconditionFailed, "orbit seed outside [0,1]");
            for (double c : f.critical()) cm_.push_back(static_cast<std::int64_t>(c * 1099511627776.0));
        }
    }

    double x() const { return x_; }
    bool exact_mode() const { return exact_; }
    const Rational& exact_value() const { return r_; }
    std::size_t index() const { return n_; }
    bool alive() const { return alive_; }
    const OrbitEnd& end() const { return end_; }

    // Moves to the next point. Returns false, and records why, when the orbit stops.
    bool advance() {
        if (!alive_) return false;
        return exact_ ? advance_exact() : advance_double();
    }

private:
    bool stop(Termination t, double c = 0.0) {
        alive_ = false;
        end_ = {t, n_, c};
        return false;
    }

    bool advance_double() {
        const auto& C = f_->critical();
        std::size_t b = f_->branch_index(x_);
        // nearest critical points are C[b-1] (<= x) and C[b] (> x)
        std::optional<std::size_t> hit;
        if (b > 0 && x_ - C[b - 1] <= kCriticalTolerance) hit = b - 1;
        else if (b < C.size() && C[b] - x_ <= kCriticalTolerance) hit = b;
        double y;
        if (hit) {
            if (!cont_ || !f_->continuous_at(*hit)) return stop(Termination::CriticalTruncation, C[*hit]);
            y = f_->one_sided_limit(*hit, Side::Minus);
        } else {
            y = f_->raw(b, x_);
            if (y < 0.0) {
                if (y < -kRangeTolerance) return stop(Termination::NumericallyDegenerate);
                y = 0.0;
            } else if (y > 1.0) {
                if (y > 1.0 + kRangeTolerance) return stop(Termination::NumericallyDegenerate);
                y = 1.0;
            }
        }
        x_ = y;
        ++n_;
        return true;
    }

    bool advance_exact() {
        const auto& C = f_->critical();
        __int128 lhs = static_cast<__int128>(r_.p) * 1099511627776LL;
        std::size_t b = 0;
        for (std::size_t i = 0; i < cm_.size(); ++i) {
            __int128 rhs = static_cast<__int128>(cm_[i]) * r_.q;
            if (lhs == rhs) {
                if (!cont_ || !f_->continuous_at(i)) return stop(Termination::CriticalTruncation, C[i]);
                b = i; // continuous: either side gives f(c)
                break;
            }
            if (lhs > rhs) b = i + 1;
        }
        __int128 np = static_cast<__int128>(f_->affine_a(b)) * r_.q + static_cast<__int128>(f_->affine_b(b)) * r_.p;
        if (np < 0 || np > r_.q) return stop(Termination::NumericallyDegenerate);
        r_.p = static_cast<std::int64_t>(np);
        x_ = r_.value();
        ++n_;
        return true;
    }

    const PiecewiseMap* f_;
    double x_;
    bool cont_;
    bool exact_ = false;
    Rational r_;
    std::vector<std::int64_t> cm_;
    std::size_t n_ = 0;
    bool alive_ = true;
    OrbitEnd end_;
};

struct OrbitResult {
    std::vector<double> points;
    std::vector<Rational> exact_points; // filled on the exact path
    OrbitEnd end;
};

inline OrbitResult iterate_orbit(const PiecewiseMap& f, const Seed& x0, std::size_t n,
                                 std::optional<bool> continue_through_critical = std::nullopt) {
    OrbitStream s(f, x0, continue_through_critical);
    OrbitResult r;
    r.points.reserve(n + 1);
    r.points.push_back(s.x());
    if (s.exact_mode()) r.exact_points.push_back(s.exact_value());
    while (s.index() < n) {
        if (!s.advance()) break;
        r.points.push_back(s.x());
        if (s.exact_mode()) r.exact_points.push_back(s.exact_value());
    }
    r.end = s.alive() ? OrbitEnd{Termination::HorizonReached, s.index(), 0.0} : s.end();
    return r;
}

} // namespace ivdyn

#endif
