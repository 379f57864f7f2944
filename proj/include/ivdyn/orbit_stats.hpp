#ifndef IVDYN_ORBIT_STATS_HPP
#define IVDYN_ORBIT_STATS_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "map.hpp"
#include "observable.hpp"
#include "orbit.hpp"

namespace ivdyn {

class CellGrid {
public:
    explicit CellGrid(double eps) : eps_(eps) {
        if (!(eps > 0.0 && eps <= 1.0)) fail(ErrorCode::PreconditionFailed, "cell width must lie in (0,1]");
        count_ = static_cast<std::size_t>(std::ceil(1.0 / eps - 1e-9));
    }
    double eps() const { return eps_; }
    std::size_t count() const { return count_; }
    std::size_t cell(double x) const {
        if (x <= 0.0) return 0;
        auto i = static_cast<std::size_t>(std::floor(x / eps_));
        return std::min(i, count_ - 1);
    }
    Interval bounds(std::size_t i) const {
        return {static_cast<double>(i) * eps_, std::min(1.0, static_cast<double>(i + 1) * eps_)};
    }

private:
    double eps_;
    std::size_t count_;
};

// Sorted set of cell indices at a fixed resolution.
struct CellSet {
    double eps = 1.0;
    std::vector<std::size_t> cells;

    std::size_t size() const { return cells.size(); }
    bool empty() const { return cells.empty(); }
    bool contains(std::size_t c) const { return std::binary_search(cells.begin(), cells.end(), c); }
    friend bool operator==(const CellSet& a, const CellSet& b) { return a.eps == b.eps && a.cells == b.cells; }
};

inline CellSet cells_from_flags(double eps, const std::vector<char>& flags) {
    CellSet s{eps, {}};
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i]) s.cells.push_back(i);
    return s;
}

// Largest distance, in cells, from a cell of one set to the nearest cell of the other.
inline std::size_t hausdorff_cells(const CellSet& a, const CellSet& b) {
    if (a.empty() || b.empty()) return (a.empty() && b.empty()) ? 0 : std::numeric_limits<std::size_t>::max();
    auto one_way = [](const CellSet& x, const CellSet& y) {
        std::size_t worst = 0;
        for (std::size_t c : x.cells) {
            auto it = std::lower_bound(y.cells.begin(), y.cells.end(), c);
            std::size_t d = std::numeric_limits<std::size_t>::max();
            if (it != y.cells.end()) d = *it - c;
            if (it != y.cells.begin()) d = std::min(d, c - *(it - 1));
            worst = std::max(worst, d);
        }
        return worst;
    };
    return std::max(one_way(a, b), one_way(b, a));
}

inline CellSet intersect(const CellSet& a, const CellSet& b) {
    CellSet r{a.eps, {}};
    std::set_intersection(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(), std::back_inserter(r.cells));
    return r;
}
inline CellSet unite(const CellSet& a, const CellSet& b) {
    CellSet r{a.eps, {}};
    std::set_union(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(), std::back_inserter(r.cells));
    return r;
}

// Maximal runs of consecutive cells as closed intervals.
inline std::vector<Interval> cell_runs(const CellSet& s) {
    std::vector<Interval> out;
    CellGrid g(s.eps);
    for (std::size_t i = 0; i < s.cells.size();) {
        std::size_t j = i;
        while (j + 1 < s.cells.size() && s.cells[j + 1] == s.cells[j] + 1) ++j;
        out.push_back({g.bounds(s.cells[i]).lo, g.bounds(s.cells[j]).hi});
        i = j + 1;
    }
    return out;
}

// Point sources: an orbit, or a stored sequence.
template <class S>
concept PointSource = requires(S& s, double& x) {
    { s.next(x) } -> std::convertible_to<bool>;
};

class OrbitSource {
public:
    OrbitSource(const PiecewiseMap& f, const Seed& s, std::optional<bool> cont = std::nullopt) : st_(f, s, cont) {}
    bool next(double& x) {
        if (first_) {
            first_ = false;
            x = st_.x();
            return true;
        }
        if (!st_.advance()) {
            truncated_ = true;
            return false;
        }
        x = st_.x();
        return true;
    }
    bool truncated() const { return truncated_; }
    const Rational* exact() const { return st_.exact_mode() ? &st_.exact_value() : nullptr; }

private:
    OrbitStream st_;
    bool first_ = true;
    bool truncated_ = false;
};

class SequenceSource {
public:
    explicit SequenceSource(std::span<const double> xs) : xs_(xs) {}
    bool next(double& x) {
        if (i_ >= xs_.size()) {
            truncated_ = true;
            return false;
        }
        x = xs_[i_++];
        return true;
    }
    bool truncated() const { return truncated_; }
    const Rational* exact() const { return nullptr; }

private:
    std::span<const double> xs_;
    std::size_t i_ = 0;
    bool truncated_ = false;
};

struct Span {
    double lo = 0.0;
    double hi = 1.0;
    bool lo_closed = true;
    bool hi_closed = true;
    bool contains(double x) const {
        return (lo_closed ? x >= lo : x > lo) && (hi_closed ? x <= hi : x < hi);
    }
};

struct Region {
    std::vector<Span> spans;
    bool contains(double x) const {
        return std::any_of(spans.begin(), spans.end(), [&](const Span& s) { return s.contains(x); });
    }
    Region complement() const {
        std::vector<Span> s = spans;
        std::sort(s.begin(), s.end(), [](const Span& a, const Span& b) { return a.lo < b.lo; });
        Region r;
        double cur = 0.0;
        bool cur_closed = true;
        for (const auto& sp : s) {
            if (sp.lo > cur || (sp.lo == cur && cur_closed && !sp.lo_closed))
                r.spans.push_back({cur, sp.lo, cur_closed, !sp.lo_closed});
            if (sp.hi > cur || (sp.hi == cur)) {
                cur = sp.hi;
                cur_closed = !sp.hi_closed;
            }
        }
        if (cur < 1.0 || cur_closed) r.spans.push_back({cur, 1.0, cur_closed, true});
        return r;
    }
};

inline std::vector<std::size_t> dyadic_checkpoints(std::size_t n) {
    std::vector<std::size_t> cps;
    for (std::size_t m = 1; m <= n; m *= 2) cps.push_back(m);
    if (cps.empty() || cps.back() != n) cps.push_back(n);
    return cps;
}

struct FrequencySeries {
    std::vector<std::size_t> checkpoints;
    std::vector<double> frequency;
    double upper_estimate = 0.0; // largest checkpoint frequency in [n/2, n]
    std::size_t length = 0;      // points actually used
    bool truncated = false;
};

template <PointSource Src>
FrequencySeries visiting_frequency(Src&& src, const Region& V, std::size_t n) {
    if (n < 1) fail(ErrorCode::PreconditionFailed, "n must be >= 1");
    FrequencySeries r;
    auto cps = dyadic_checkpoints(n);
    std::size_t hits = 0, m = 0, ci = 0;
    double x;
    while (m < n && src.next(x)) {
        if (V.contains(x)) ++hits;
        ++m;
        if (ci < cps.size() && m == cps[ci]) {
            r.checkpoints.push_back(m);
            r.frequency.push_back(static_cast<double>(hits) / static_cast<double>(m));
            ++ci;
        }
    }
    r.length = m;
    if (m < n) {
        r.truncated = true;
        if (m > 0 && (r.checkpoints.empty() || r.checkpoints.back() != m)) {
            r.checkpoints.push_back(m);
            r.frequency.push_back(static_cast<double>(hits) / static_cast<double>(m));
        }
    }
    double half = 0.5 * static_cast<double>(m);
    for (std::size_t i = 0; i < r.checkpoints.size(); ++i)
        if (static_cast<double>(r.checkpoints[i]) >= half) r.upper_estimate = std::max(r.upper_estimate, r.frequency[i]);
    return r;
}

inline FrequencySeries visiting_frequency(const PiecewiseMap& f, const Seed& x0, const Region& V, std::size_t n) {
    return visiting_frequency(OrbitSource(f, x0), V, n);
}

struct EmpiricalMeasure {
    double eps = 1.0;
    std::vector<double> weights;
    std::size_t sample_length = 0;

    double total() const {
        long double s = 0;
        for (double w : weights) s += w;
        return static_cast<double>(s);
    }
};

template <PointSource Src>
EmpiricalMeasure empirical_measure(Src&& src, std::size_t n, double eps) {
    CellGrid g(eps);
    std::vector<std::size_t> counts(g.count(), 0);
    std::size_t m = 0;
    double x;
    while (m < n && src.next(x)) {
        ++counts[g.cell(x)];
        ++m;
    }
    EmpiricalMeasure e{eps, std::vector<double>(g.count(), 0.0), m};
    if (m == 0) return e;
    for (std::size_t i = 0; i < counts.size(); ++i) e.weights[i] = static_cast<double>(counts[i]) / static_cast<double>(m);
    return e;
}

struct CellEstimate {
    CellSet cells;
    bool truncated = false;
    std::size_t length = 0;
};

// Cells visited by the orbit segment x_{n_transient}, ..., x_n.
template <PointSource Src>
CellEstimate omega_limit_estimate(Src&& src, std::size_t n_transient, std::size_t n, double eps) {
    if (n < n_transient) fail(ErrorCode::PreconditionFailed, "n must be >= n_transient");
    CellGrid g(eps);
    std::vector<char> seen(g.count(), 0);
    std::size_t j = 0;
    double x;
    while (j <= n && src.next(x)) {
        if (j >= n_transient) seen[g.cell(x)] = 1;
        ++j;
    }
    CellEstimate r{cells_from_flags(eps, seen), j <= n_transient, j};
    return r;
}

inline CellEstimate omega_limit_estimate(const PiecewiseMap& f, const Seed& x0, std::size_t n_transient, std::size_t n,
                                         double eps) {
    return omega_limit_estimate(OrbitSource(f, x0), n_transient, n, eps);
}

// Cells whose visit frequency over x_0, ..., x_{n-1} exceeds theta (default 1/sqrt(n)).
template <PointSource Src>
CellEstimate statistical_omega_estimate(Src&& src, std::size_t n, double eps, double theta = -1.0) {
    if (theta < 0) theta = 1.0 / std::sqrt(static_cast<double>(n));
    if (!(theta > 0)) fail(ErrorCode::PreconditionFailed, "theta must be positive");
    CellGrid g(eps);
    std::vector<std::size_t> counts(g.count(), 0);
    std::size_t m = 0;
    double x;
    while (m < n && src.next(x)) {
        ++counts[g.cell(x)];
        ++m;
    }
    CellEstimate r;
    r.cells.eps = eps;
    r.length = m;
    r.truncated = m < n;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (m > 0 && static_cast<double>(counts[i]) / static_cast<double>(m) > theta) r.cells.cells.push_back(i);
    return r;
}

inline CellEstimate statistical_omega_estimate(const PiecewiseMap& f, const Seed& x0, std::size_t n, double eps,
                                               double theta = -1.0) {
    return statistical_omega_estimate(OrbitSource(f, x0), n, eps, theta);
}

struct BirkhoffSeries {
    std::string observable;
    std::vector<std::size_t> checkpoints;
    std::vector<double> averages;
    std::vector<double> tail_sup; // over partial averages with index in [m/2, m]
    std::vector<double> tail_inf;
    std::size_t length = 0;
    bool truncated = false;

    double upper_estimate() const { return tail_sup.empty() ? 0.0 : tail_sup.back(); }
    double lower_estimate() const { return tail_inf.empty() ? 0.0 : tail_inf.back(); }
};

template <PointSource Src>
BirkhoffSeries birkhoff_envelope(Src&& src, const Observable& phi, std::size_t n) {
    if (n < 1) fail(ErrorCode::PreconditionFailed, "n must be >= 1");
    BirkhoffSeries r;
    r.observable = phi.id();
    auto cps = dyadic_checkpoints(n);
    double a0 = 0, b0 = 0;
    bool affine = phi.affine(a0, b0);
    long double sum = 0;
    __int128 psum = 0;
    std::int64_t q = 0;
    bool exact = false;
    std::size_t m = 0, ci = 0;
    const std::size_t final_start = (n + 1) / 2;
    double wsup = -std::numeric_limits<double>::infinity(), winf = std::numeric_limits<double>::infinity();
    double fsup = wsup, finf = winf;
    double x;
    while (m < n && src.next(x)) {
        if (m == 0) {
            const Rational* e = src.exact();
            if (affine && e) {
                exact = true;
                q = e->q;
            }
        }
        double avg;
        ++m;
        if (exact) {
            psum += src.exact()->p;
            long double frac = static_cast<long double>(psum) / (static_cast<long double>(q) * static_cast<long double>(m));
            avg = b0 == 0 ? a0 : static_cast<double>(static_cast<long double>(a0) + static_cast<long double>(b0) * frac);
        } else {
            sum += static_cast<long double>(phi(x));
            avg = static_cast<double>(sum / static_cast<long double>(m));
        }
        if (phi.is_constant()) avg = phi.max_value();
        wsup = std::max(wsup, avg);
        winf = std::min(winf, avg);
        if (m >= final_start) {
            fsup = std::max(fsup, avg);
            finf = std::min(finf, avg);
        }
        bool at_cp = ci < cps.size() && m == cps[ci];
        if (at_cp) {
            r.checkpoints.push_back(m);
            r.averages.push_back(avg);
            if (m == n) {
                r.tail_sup.push_back(fsup);
                r.tail_inf.push_back(finf);
            } else {
                r.tail_sup.push_back(wsup);
                r.tail_inf.push_back(winf);
            }
            ++ci;
            wsup = winf = avg; // the next dyadic window starts at m
        }
    }
    r.length = m;
    if (m < n) {
        r.truncated = true;
        if (m > 0 && (r.checkpoints.empty() || r.checkpoints.back() != m)) {
            r.checkpoints.push_back(m);
            double avg = exact ? r.averages.empty() ? 0.0 : r.averages.back() : static_cast<double>(sum / m);
            r.averages.push_back(avg);
            r.tail_sup.push_back(std::max(wsup, avg));
            r.tail_inf.push_back(std::min(winf, avg));
        }
    }
    return r;
}

inline BirkhoffSeries birkhoff_envelope(const PiecewiseMap& f, const Seed& x0, const Observable& phi, std::size_t n) {
    return birkhoff_envelope(OrbitSource(f, x0), phi, n);
}

struct HistoricVerdict {
    bool historic = false;
    double gap = 0.0;
    std::vector<double> gaps; // per checkpoint
    bool truncated = false;
};

inline HistoricVerdict historic_from_series(const BirkhoffSeries& s, double gap_tol) {
    if (!(gap_tol > 0)) fail(ErrorCode::PreconditionFailed, "gap_tol must be positive");
    HistoricVerdict v;
    v.truncated = s.truncated;
    for (std::size_t i = 0; i < s.checkpoints.size(); ++i) v.gaps.push_back(s.tail_sup[i] - s.tail_inf[i]);
    if (v.gaps.empty()) return v;
    v.gap = v.gaps.back();
    std::size_t k = v.gaps.size();
    bool decaying = k >= 3 && v.gaps[k - 3] > v.gaps[k - 2] && v.gaps[k - 2] > v.gaps[k - 1];
    v.historic = v.gap > gap_tol && !decaying;
    return v;
}

template <PointSource Src>
HistoricVerdict detect_historic(Src&& src, const Observable& phi, std::size_t n, double gap_tol) {
    return historic_from_series(birkhoff_envelope(std::forward<Src>(src), phi, n), gap_tol);
}

inline HistoricVerdict detect_historic(const PiecewiseMap& f, const Seed& x0, const Observable& phi, std::size_t n,
                                       double gap_tol) {
    return detect_historic(OrbitSource(f, x0), phi, n, gap_tol);
}

} // namespace ivdyn

#endif
