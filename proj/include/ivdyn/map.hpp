#ifndef IVDYN_MAP_HPP
#define IVDYN_MAP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "interval.hpp"

namespace ivdyn {

inline constexpr double kCriticalTolerance = 1e-14; // delta_C
inline constexpr double kRangeTolerance = 1e-12;

enum class Side { Minus, Plus };
enum class Monotonicity { Increasing, Decreasing };

// fma is hardware for double but emulated (slow) for long double
template <class T>
T mul_add(T a, T b, T c) {
    if constexpr (std::is_same_v<T, double>) return std::fma(a, b, c);
    else return a * b + c;
}

// p(x) = sum_k coeffs[k] * (x - center)^k
struct Polynomial {
    std::vector<double> coeffs;
    double center = 0.0;

    template <class T>
    T operator()(T x) const {
        T u = x - static_cast<T>(center);
        T acc = 0;
        for (std::size_t k = coeffs.size(); k-- > 0;) acc = mul_add(acc, u, static_cast<T>(coeffs[k]));
        return acc;
    }

    template <class T>
    T derivative(T x) const {
        T u = x - static_cast<T>(center);
        T acc = 0;
        for (std::size_t k = coeffs.size(); k-- > 1;)
            acc = mul_add(acc, u, static_cast<T>(k) * static_cast<T>(coeffs[k]));
        return acc;
    }

    Interval enclose(Interval x) const {
        Interval u = x - Interval::point(center);
        Interval acc = Interval::point(0.0);
        for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * u + Interval::point(coeffs[k]);
        return acc;
    }

    std::size_t degree() const {
        std::size_t d = coeffs.size();
        while (d > 1 && coeffs[d - 1] == 0.0) --d;
        return d == 0 ? 0 : d - 1;
    }

    // Coefficients of the same polynomial expanded about a new center.
    std::vector<long double> shifted(double new_center) const {
        std::size_t n = coeffs.size();
        std::vector<long double> b(coeffs.begin(), coeffs.end());
        long double h = static_cast<long double>(new_center) - center;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = n - 1; j > i; --j) b[j - 1] += h * b[j];
        return b;
    }
};

// value = offset + scale * phi(x)^alpha, with phi >= 0 on the piece when alpha != 1.
// A plain polynomial is offset 0, scale 1, alpha 1.
struct Form {
    Polynomial phi;
    double offset = 0.0;
    double scale = 1.0;
    double alpha = 1.0;

    static Form polynomial(std::vector<double> c, double center = 0.0) {
        return Form{Polynomial{std::move(c), center}, 0.0, 1.0, 1.0};
    }
    static Form power(double offset, double scale, double alpha, std::vector<double> c, double center = 0.0) {
        return Form{Polynomial{std::move(c), center}, offset, scale, alpha};
    }

    bool is_polynomial() const { return offset == 0.0 && scale == 1.0 && alpha == 1.0; }

    template <class T>
    T operator()(T x) const {
        T p = phi(x);
        if (is_polynomial()) return p;
        if (alpha == 1.0) return static_cast<T>(offset) + static_cast<T>(scale) * p;
        if (p < 0) p = 0;
        return static_cast<T>(offset) + static_cast<T>(scale) * std::pow(p, static_cast<T>(alpha));
    }

    template <class T>
    T derivative(T x) const {
        T dp = phi.derivative(x);
        if (alpha == 1.0) return static_cast<T>(scale) * dp;
        T p = phi(x);
        if (p <= 0) return 0;
        return static_cast<T>(scale) * static_cast<T>(alpha) * std::pow(p, static_cast<T>(alpha - 1)) * dp;
    }

    Interval enclose(Interval x) const {
        Interval p = phi.enclose(x);
        if (is_polynomial()) return p;
        Interval q = (alpha == 1.0) ? p : pow_nonneg(p, alpha);
        return Interval::point(offset) + Interval::point(scale) * q;
    }
};

struct Piece {
    double lo = 0.0;
    double hi = 1.0;
    Form form;
};

// One monotone branch on the open interval (lo, hi); usually one piece, several
// after surgery by localize_map.
struct BranchSpec {
    double lo = 0.0;
    double hi = 1.0;
    Monotonicity mono = Monotonicity::Increasing;
    std::vector<Piece> pieces;

    static BranchSpec single(double lo, double hi, Monotonicity m, Form f) {
        return BranchSpec{lo, hi, m, {Piece{lo, hi, std::move(f)}}};
    }

    std::size_t piece_index(double x) const {
        for (std::size_t i = 0; i + 1 < pieces.size(); ++i)
            if (x < pieces[i].hi) return i;
        return pieces.size() - 1;
    }

    template <class T>
    T value(T x) const {
        return pieces[piece_index(static_cast<double>(x))].form(x);
    }
    template <class T>
    T derivative(T x) const {
        return pieces[piece_index(static_cast<double>(x))].form.derivative(x);
    }
    // Rigorous enclosure of the branch expression at a point of the closed domain.
    Interval enclose(double x) const {
        std::size_t i = piece_index(x);
        Interval v = pieces[i].form.enclose(Interval::point(x));
        // at a splice point the two adjacent pieces agree up to rounding; keep both
        if (i > 0 && x == pieces[i - 1].hi) v = hull(v, pieces[i - 1].form.enclose(Interval::point(x)));
        return v;
    }
    bool increasing() const { return mono == Monotonicity::Increasing; }
};

struct CriticalExponents {
    double c = 0.0;
    double alpha = 1.0; // left side
    double beta = 1.0;  // right side
};

struct NonflatReport {
    bool nonflat = true;
    std::vector<CriticalExponents> points;
};

class PiecewiseMap {
public:
    PiecewiseMap() = default;

    PiecewiseMap(std::vector<double> critical, std::vector<BranchSpec> branches, std::string name = "")
        : critical_(std::move(critical)), branches_(std::move(branches)), name_(std::move(name)) {
        validate();
    }

    const std::string& name() const { return name_; }
    const std::vector<double>& critical() const { return critical_; }
    const std::vector<BranchSpec>& branches() const { return branches_; }
    std::size_t critical_count() const { return critical_.size(); }

    bool continuous_at(std::size_t i) const { return continuous_[i]; }
    bool is_continuous() const {
        return std::all_of(continuous_.begin(), continuous_.end(), [](bool b) { return b; });
    }
    double boundary_value(int end) const { return end == 0 ? f0_ : f1_; }

    // Index of the branch whose closed domain holds x, preferring the right one at a critical point.
    std::size_t branch_index(double x) const {
        return static_cast<std::size_t>(std::upper_bound(critical_.begin(), critical_.end(), x) - critical_.begin());
    }

    // Index of the critical point within tol of x, if any.
    std::optional<std::size_t> critical_near(double x, double tol = kCriticalTolerance) const {
        auto it = std::lower_bound(critical_.begin(), critical_.end(), x - tol);
        if (it != critical_.end() && *it <= x + tol) return static_cast<std::size_t>(it - critical_.begin());
        return std::nullopt;
    }

    template <class T>
    T raw(std::size_t branch, T x) const {
        return branches_[branch].value(x);
    }

    double evaluate(double x) const {
        if (auto c = critical_near(x))
            fail(ErrorCode::CriticalPoint, "x = " + fmt(x) + " is within delta_C of c = " + fmt(critical_[*c]));
        if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::RangeViolation, "x = " + fmt(x) + " outside [0,1]");
        return clamp_checked(raw(branch_index(x), x));
    }

    double derivative(double x) const {
        if (auto c = critical_near(x)) fail(ErrorCode::CriticalPoint, "derivative at critical point " + fmt(critical_[*c]));
        return branches_[branch_index(x)].derivative(x);
    }

    // Exact branch-expression limit f(c-) or f(c+).
    double one_sided_limit(std::size_t ci, Side s) const {
        return s == Side::Minus ? cminus_[ci] : cplus_[ci];
    }
    double one_sided_limit_at(double c, Side s) const {
        auto it = std::find(critical_.begin(), critical_.end(), c);
        if (it == critical_.end()) fail(ErrorCode::CriticalPoint, fmt(c) + " is not a critical point");
        return one_sided_limit(static_cast<std::size_t>(it - critical_.begin()), s);
    }

    // Branch value continued to the closure of the branch domain.
    double closure_value(std::size_t branch, double x) const {
        return clamp_soft(raw(branch, x));
    }

    // Rigorous enclosure of f over [x.lo, x.hi], which must lie in the closure of one branch.
    Interval image_on_branch(std::size_t branch, Interval x) const {
        const auto& b = branches_[branch];
        Interval a = b.enclose(x.lo), z = b.enclose(x.hi);
        Interval r = hull(a, z);
        return Interval{std::max(r.lo, 0.0), std::min(r.hi, 1.0)};
    }

    // Rigorous enclosure of f([lo,hi] \ C) as a list of per-branch intervals.
    std::vector<Interval> image(Interval x) const {
        std::vector<Interval> out;
        std::size_t b0 = branch_index(x.lo);
        double lo = x.lo;
        for (std::size_t b = b0; b < branches_.size(); ++b) {
            double hi = std::min(x.hi, branches_[b].hi);
            if (hi < lo) break;
            if (hi > lo || x.lo == x.hi) out.push_back(image_on_branch(b, {lo, hi}));
            if (x.hi <= branches_[b].hi) break;
            lo = branches_[b].hi;
        }
        return out;
    }

    // Solve f(x) = y on the closure of a branch by bisection; y must lie in the branch image.
    template <class T = double>
    T inverse(std::size_t branch, T y, T lo, T hi) const {
        const auto& b = branches_[branch];
        bool inc = b.increasing();
        for (int it = 0; it < 400; ++it) {
            T m = lo + (hi - lo) / 2;
            if (m <= lo || m >= hi) break;
            T v = b.value(m);
            if ((v < y) == inc) lo = m; else hi = m;
        }
        return lo + (hi - lo) / 2;
    }
    template <class T = double>
    T inverse(std::size_t branch, T y) const {
        return inverse<T>(branch, y, static_cast<T>(branches_[branch].lo), static_cast<T>(branches_[branch].hi));
    }

    // True when every branch is x -> A + B x with integer A, B and every critical
    // point is dyadic, so rational orbits can be followed exactly.
    bool integer_affine() const { return integer_affine_; }
    long long affine_a(std::size_t b) const { return aff_a_[b]; }
    long long affine_b(std::size_t b) const { return aff_b_[b]; }

    static std::string fmt(double x) {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    }

private:
    double clamp_checked(double v) const {
        if (v < 0.0) {
            if (v < -kRangeTolerance) fail(ErrorCode::RangeViolation, "branch value " + fmt(v) + " below 0");
            return 0.0;
        }
        if (v > 1.0) {
            if (v > 1.0 + kRangeTolerance) fail(ErrorCode::RangeViolation, "branch value " + fmt(v) + " above 1");
            return 1.0;
        }
        return v;
    }
    static double clamp_soft(double v) { return std::min(1.0, std::max(0.0, v)); }

    void validate() {
        auto bad = [](const std::string& m) { fail(ErrorCode::InvalidMap, m); };
        if (branches_.size() != critical_.size() + 1) bad("need one branch per component of [0,1] minus C");
        for (std::size_t i = 0; i < critical_.size(); ++i) {
            if (!(critical_[i] > 0.0 && critical_[i] < 1.0)) bad("critical point outside (0,1)");
            if (i > 0 && !(critical_[i] > critical_[i - 1])) bad("critical points must be strictly increasing");
        }
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            auto& br = branches_[b];
            double lo = b == 0 ? 0.0 : critical_[b - 1];
            double hi = b == critical_.size() ? 1.0 : critical_[b];
            if (br.lo != lo || br.hi != hi)
                bad("branch " + std::to_string(b) + " domain (" + fmt(br.lo) + ", " + fmt(br.hi) +
                    ") does not match the partition by C");
            if (br.pieces.empty()) bad("branch without pieces");
            if (br.pieces.front().lo != lo || br.pieces.back().hi != hi) bad("pieces do not cover the branch");
            for (std::size_t p = 0; p < br.pieces.size(); ++p) {
                const auto& pc = br.pieces[p];
                if (!(pc.hi > pc.lo)) bad("empty piece");
                if (p > 0 && pc.lo != br.pieces[p - 1].hi) bad("pieces must be contiguous");
                if (pc.form.alpha < 1.0) bad("exponent alpha must be >= 1");
                if (pc.form.phi.coeffs.empty()) bad("empty coefficient list");
                if (pc.form.alpha != 1.0) {
                    for (int s = 0; s <= 64; ++s) {
                        double x = pc.lo + (pc.hi - pc.lo) * s / 64.0;
                        if (pc.form.phi(x) < -1e-12) bad("phi must be nonnegative where alpha != 1");
                    }
                }
            }
            // monotonicity and range on samples
            const int N = 256;
            double prev = br.value(lo);
            for (int s = 0; s <= N; ++s) {
                double x = lo + (hi - lo) * s / N;
                double v = br.value(x);
                if (v < -kRangeTolerance || v > 1.0 + kRangeTolerance)
                    bad("branch " + std::to_string(b) + " leaves [0,1] at x = " + fmt(x));
                if (s > 0 && s < N) {
                    double d = br.derivative(x);
                    if ((br.increasing() && d < 0) || (!br.increasing() && d > 0))
                        bad("declared monotonicity fails on branch " + std::to_string(b) + " at x = " + fmt(x));
                }
                if (s > 0 && ((br.increasing() && v < prev - 1e-12) || (!br.increasing() && v > prev + 1e-12)))
                    bad("declared monotonicity fails on branch " + std::to_string(b));
                prev = v;
            }
        }
        continuous_.assign(critical_.size(), false);
        cminus_.resize(critical_.size());
        cplus_.resize(critical_.size());
        for (std::size_t i = 0; i < critical_.size(); ++i) {
            cminus_[i] = clamp_soft(branches_[i].value(critical_[i]));
            cplus_[i] = clamp_soft(branches_[i + 1].value(critical_[i]));
            continuous_[i] = std::abs(cminus_[i] - cplus_[i]) <= kRangeTolerance;
        }
        f0_ = clamp_soft(branches_.front().value(0.0));
        f1_ = clamp_soft(branches_.back().value(1.0));

        integer_affine_ = true;
        aff_a_.assign(branches_.size(), 0);
        aff_b_.assign(branches_.size(), 0);
        for (std::size_t b = 0; b < branches_.size() && integer_affine_; ++b) {
            const auto& br = branches_[b];
            if (br.pieces.size() != 1 || !br.pieces[0].form.is_polynomial() || br.pieces[0].form.phi.degree() > 1) {
                integer_affine_ = false;
                break;
            }
            const auto& p = br.pieces[0].form.phi;
            double B = p.coeffs.size() > 1 ? p.coeffs[1] : 0.0;
            double A = p.coeffs[0] - B * p.center;
            if (A != std::floor(A) || B != std::floor(B) || std::abs(A) > 64 || std::abs(B) > 64) integer_affine_ = false;
            aff_a_[b] = static_cast<long long>(A);
            aff_b_[b] = static_cast<long long>(B);
        }
        for (double c : critical_) {
            double m = c * 1099511627776.0; // 2^40
            if (m != std::floor(m)) integer_affine_ = false;
        }
    }

    std::vector<double> critical_;
    std::vector<BranchSpec> branches_;
    std::string name_;
    std::vector<bool> continuous_;
    std::vector<double> cminus_, cplus_;
    double f0_ = 0.0, f1_ = 0.0;
    bool integer_affine_ = false;
    std::vector<long long> aff_a_, aff_b_;
};

// Certifies the power-law normal form on both sides of every critical point.
inline NonflatReport check_nonflat(const PiecewiseMap& f) {
    NonflatReport rep;
    auto side_exponent = [&](const BranchSpec& br, double c, bool left) -> double {
        const Piece& pc = left ? br.pieces.back() : br.pieces.front();
        const Form& fm = pc.form;
        if (!fm.is_polynomial() && fm.alpha != 1.0) {
            double ph = fm.phi(c);
            double dph = fm.phi.derivative(c);
            if (std::abs(ph) <= 1e-12) {
                if (std::abs(dph) <= 1e-12)
                    fail(ErrorCode::FlatBranch, "phi has a critical point at c = " + PiecewiseMap::fmt(c));
                return fm.alpha;
            }
        }
        auto b = fm.phi.shifted(c);
        long double scale = 0;
        for (auto v : b) scale = std::max(scale, std::abs(v));
        for (std::size_t k = 1; k < b.size(); ++k)
            if (std::abs(b[k]) > 1e-10L * std::max(scale, 1.0L)) return static_cast<double>(k);
        fail(ErrorCode::FlatBranch, "no nonvanishing derivative at c = " + PiecewiseMap::fmt(c));
    };
    for (std::size_t i = 0; i < f.critical_count(); ++i) {
        double c = f.critical()[i];
        CriticalExponents ce;
        ce.c = c;
        ce.alpha = side_exponent(f.branches()[i], c, true);
        ce.beta = side_exponent(f.branches()[i + 1], c, false);
        rep.points.push_back(ce);
    }
    return rep;
}

struct Gap {
    std::size_t critical_index = 0;
    Side side = Side::Minus;
    double endpoint = 0.0; // a_c for the minus side, b_c for the plus side
};

// Replaces f on each gap (a_c, c) or (c, b_c) by a monotone power splice that
// joins f at the far endpoint and sends the excluded side of c to 0 or 1.
inline PiecewiseMap localize_map(const PiecewiseMap& f, const std::vector<std::size_t>& keep_minus,
                                 const std::vector<std::size_t>& keep_plus, const std::vector<Gap>& gaps,
                                 double exponent = 2.0) {
    const auto& C = f.critical();
    auto kept = [](const std::vector<std::size_t>& v, std::size_t i) {
        return std::find(v.begin(), v.end(), i) != v.end();
    };
    for (std::size_t i = 0; i < C.size(); ++i) {
        for (Side s : {Side::Minus, Side::Plus}) {
            bool keep = kept(s == Side::Minus ? keep_minus : keep_plus, i);
            bool has_gap = std::any_of(gaps.begin(), gaps.end(),
                                       [&](const Gap& g) { return g.critical_index == i && g.side == s; });
            if (!keep && !has_gap) fail(ErrorCode::GapOverlap, "excluded side without a gap interval");
            if (keep && has_gap) fail(ErrorCode::GapOverlap, "gap given for a kept side");
        }
    }
    // gap intervals must stay inside their branch and be pairwise disjoint
    std::vector<Interval> spans;
    for (const auto& g : gaps) {
        if (g.critical_index >= C.size()) fail(ErrorCode::GapOverlap, "gap refers to an unknown critical point");
        double c = C[g.critical_index];
        Interval iv = g.side == Side::Minus ? Interval{g.endpoint, c} : Interval{c, g.endpoint};
        std::size_t b = g.side == Side::Minus ? g.critical_index : g.critical_index + 1;
        const auto& br = f.branches()[b];
        if (!(iv.lo < iv.hi) || iv.lo < br.lo || iv.hi > br.hi ||
            (g.side == Side::Minus && iv.lo <= br.lo) || (g.side == Side::Plus && iv.hi >= br.hi))
            fail(ErrorCode::GapOverlap, "gap interval must lie strictly inside the adjacent branch domain");
        for (const auto& o : spans)
            if (iv.lo < o.hi && o.lo < iv.hi) fail(ErrorCode::GapOverlap, "gap intervals intersect");
        spans.push_back(iv);
    }
    std::vector<BranchSpec> nb = f.branches();
    for (const auto& g : gaps) {
        double c = C[g.critical_index];
        std::size_t b = g.side == Side::Minus ? g.critical_index : g.critical_index + 1;
        BranchSpec& br = nb[b];
        double e = g.endpoint;
        double fe = f.closure_value(b, e);
        bool inc = br.increasing();
        std::vector<Piece> out;
        if (g.side == Side::Minus) {
            double target = inc ? 1.0 : 0.0;
            for (const auto& pc : br.pieces) {
                if (pc.lo >= e) break;
                Piece q = pc;
                q.hi = std::min(pc.hi, e);
                out.push_back(q);
            }
            double w = c - e;
            out.push_back(Piece{e, c, Form::power(target, fe - target, exponent, {0.0, -1.0 / w}, c)});
        } else {
            double target = inc ? 0.0 : 1.0;
            double w = e - c;
            out.push_back(Piece{c, e, Form::power(target, fe - target, exponent, {0.0, 1.0 / w}, c)});
            for (const auto& pc : br.pieces) {
                if (pc.hi <= e) continue;
                Piece q = pc;
                q.lo = std::max(pc.lo, e);
                out.push_back(q);
            }
        }
        br.pieces = std::move(out);
    }
    return PiecewiseMap(C, std::move(nb), f.name().empty() ? "" : f.name() + "-localized");
}

} // namespace ivdyn

#endif
