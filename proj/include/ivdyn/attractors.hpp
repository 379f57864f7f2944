#ifndef IVDYN_ATTRACTORS_HPP
#define IVDYN_ATTRACTORS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "attractor_types.hpp"
#include "map.hpp"
#include "orbit.hpp"
#include "orbit_stats.hpp"
#include "structure.hpp"

namespace ivdyn {

// ---------------------------------------------------------------------------
// Periodic-like attractors

struct ProbeOptions {
    double r_probe = 1e-3;
    std::size_t horizon = 100000;
    double converge_tol = 1e-10;
};

namespace detail {

enum class ProbeOutcome { Converged, Escaped, Inconclusive };

inline ProbeOutcome run_probe(const PiecewiseMap& f, double x, double p, std::size_t q, const ProbeOptions& o) {
    OrbitStream st(f, x);
    for (std::size_t k = 1; k <= o.horizon; ++k) {
        if (!st.advance()) return ProbeOutcome::Escaped;
        if (k % q) continue;
        double d = std::abs(st.x() - p);
        if (d <= o.converge_tol) return ProbeOutcome::Converged;
        if (d > 4 * o.r_probe) return ProbeOutcome::Escaped;
    }
    return ProbeOutcome::Inconclusive;
}

inline std::vector<double> canonical_cycle(std::vector<double> pts) {
    auto it = std::min_element(pts.begin(), pts.end());
    std::rotate(pts.begin(), it, pts.end());
    return pts;
}

} // namespace detail

// Attracting periodic and periodic-like orbits of period <= max_period. Candidates whose
// probes neither converge nor escape are returned as Unresolved with note "ProbeInconclusive".
inline std::vector<AttractorEstimate> detect_periodic_like(const PiecewiseMap& f, std::size_t max_period,
                                                           const ProbeOptions& opt = {}) {
    if (max_period < 1) fail(ErrorCode::PreconditionFailed, "max_period must be >= 1");
    auto table = periodic_orbits(f, max_period);
    std::vector<AttractorEstimate> out;
    for (const auto& o : table.all()) {
        if (!o.through_critical && o.multiplier > 1.0 + 1e-6) continue;
        double p = o.points[0];
        bool converged = false, inconclusive = false;
        for (int side : {-1, 1}) {
            bool all = true, any = false;
            for (double r : {opt.r_probe, opt.r_probe / 8}) {
                double x = p + side * r;
                if (x < 0.0 || x > 1.0) { all = false; continue; }
                any = true;
                auto res = detail::run_probe(f, x, p, o.period, opt);
                if (res != detail::ProbeOutcome::Converged) all = false;
                if (res == detail::ProbeOutcome::Inconclusive) inconclusive = true;
            }
            if (any && all) converged = true;
        }
        if (!converged && !inconclusive) continue;
        AttractorEstimate a;
        a.kind = converged ? AttractorKind::PeriodicLike : AttractorKind::Unresolved;
        a.points = detail::canonical_cycle(o.points);
        a.one_sided = o.one_sided;
        if (!converged) a.note = "ProbeInconclusive";
        out.push_back(std::move(a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Signed critical sides and critical-orbit closures

struct SignedCriticalSides {
    std::vector<std::size_t> minus, plus;
    std::vector<double> finest_minus, finest_plus; // finest rung entered per critical point, 0 when none
    bool horizon_flag = false;                     // some side reached a coarse rung but not the finest
    bool truncated = false;
};

inline std::vector<double> default_ladder() { return {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}; }

template <PointSource Src>
SignedCriticalSides signed_critical_sides(const PiecewiseMap& f, Src&& src, std::size_t n,
                                          std::vector<double> ladder = default_ladder()) {
    std::sort(ladder.begin(), ladder.end(), std::greater<>());
    const auto& C = f.critical();
    std::vector<double> dm(C.size(), 2.0), dp(C.size(), 2.0);
    double x;
    std::size_t j = 0;
    while (j < n && src.next(x)) {
        ++j;
        auto it = std::upper_bound(C.begin(), C.end(), x);
        if (it != C.end()) { // x < c
            std::size_t i = static_cast<std::size_t>(it - C.begin());
            dm[i] = std::min(dm[i], *it - x);
        }
        if (it != C.begin()) {
            std::size_t i = static_cast<std::size_t>(it - C.begin()) - 1;
            if (x > C[i]) dp[i] = std::min(dp[i], x - C[i]);
        }
    }
    SignedCriticalSides s;
    s.truncated = j < n;
    auto finest = [&](double d) {
        double r = 0.0;
        for (double eta : ladder)
            if (d < eta) r = eta;
        return r;
    };
    for (std::size_t i = 0; i < C.size(); ++i) {
        double fm = finest(dm[i]), fp = finest(dp[i]);
        s.finest_minus.push_back(fm);
        s.finest_plus.push_back(fp);
        if (fm == ladder.back()) s.minus.push_back(i);
        else if (fm > 0) s.horizon_flag = true;
        if (fp == ladder.back()) s.plus.push_back(i);
        else if (fp > 0) s.horizon_flag = true;
    }
    return s;
}

inline SignedCriticalSides signed_critical_sides(const PiecewiseMap& f, const Seed& x0, std::size_t n,
                                                 std::vector<double> ladder = default_ladder()) {
    return signed_critical_sides(f, OrbitSource(f, x0), n, std::move(ladder));
}

struct CriticalOrbitClosure {
    CellSet cells;
    std::vector<CriticalValue> generators;
    std::vector<bool> truncated; // per generator
};

inline CellSet orbit_cells(const PiecewiseMap& f, double v, std::size_t n, double eps, bool* truncated = nullptr) {
    CellGrid g(eps);
    std::vector<char> seen(g.count(), 0);
    OrbitSource src(f, v);
    double x;
    std::size_t j = 0;
    while (j < n && src.next(x)) {
        seen[g.cell(x)] = 1;
        ++j;
    }
    if (truncated) *truncated = j < n;
    return cells_from_flags(eps, seen);
}

inline CriticalOrbitClosure critical_orbit_closure(const PiecewiseMap& f, const std::vector<CriticalValue>& V, std::size_t n,
                                                   double eps) {
    if (V.empty()) fail(ErrorCode::PreconditionFailed, "no generators given");
    CriticalOrbitClosure r;
    r.cells.eps = eps;
    for (const auto& v : V) {
        bool tr = false;
        r.cells = unite(r.cells, orbit_cells(f, f.one_sided_limit(v.critical_index, v.side), n, eps, &tr));
        r.generators.push_back(v);
        r.truncated.push_back(tr);
    }
    return r;
}

inline std::vector<CriticalValue> generators_of(const SignedCriticalSides& s) {
    std::vector<CriticalValue> V;
    for (auto i : s.minus) V.push_back({i, Side::Minus});
    for (auto i : s.plus) V.push_back({i, Side::Plus});
    return V;
}

inline CriticalOrbitClosure critical_orbit_closure(const PiecewiseMap& f, const SignedCriticalSides& s, std::size_t n,
                                                   double eps) {
    return critical_orbit_closure(f, generators_of(s), n, eps);
}

// ---------------------------------------------------------------------------
// Classification

struct ClassifyOptions {
    std::size_t max_period = 64;
    std::size_t max_intervals = 64;
    std::size_t atoms = 0; // point-like recurrent cells found by the caller
    double interval_slope = 0.95;
    double cantor_slope = 0.8;
};

inline CellSet coarsen(const CellSet& s) {
    CellSet r{s.eps * 2, {}};
    for (auto c : s.cells)
        if (r.cells.empty() || r.cells.back() != c / 2) r.cells.push_back(c / 2);
    return r;
}

// `fine` is the support at the finest level; the verdict is at resolution fine.eps * 2^(levels-1).
inline AttractorEstimate classify_attractor(const PiecewiseMap& f, const CellSet& fine, std::size_t levels = 3,
                                            const ClassifyOptions& opt = {}) {
    if (fine.empty()) fail(ErrorCode::PreconditionFailed, "support is empty");
    if (levels < 2) fail(ErrorCode::PreconditionFailed, "at least two levels are needed");
    std::vector<CellSet> lv(levels);
    lv[levels - 1] = fine;
    for (std::size_t k = levels - 1; k-- > 0;) lv[k] = coarsen(lv[k + 1]);
    AttractorEstimate a;
    a.eps = lv[0].eps;
    a.cells = lv[0];
    for (const auto& s : lv) a.level_counts.push_back(s.size());

    auto runs_f = cell_runs(lv[levels - 1]);
    auto runs_c = cell_runs(lv[0]);
    bool narrow = std::all_of(runs_f.begin(), runs_f.end(), [&](const Interval& r) { return r.width() <= 2 * fine.eps * (1 + 1e-9); });
    if (runs_f.size() <= opt.max_period && narrow && runs_f.size() == runs_c.size()) {
        std::vector<double> pts;
        for (const auto& r : runs_f) pts.push_back(r.mid());
        bool invariant = true;
        for (double p : pts) {
            OrbitStream st(f, p);
            if (!st.advance()) { invariant = false; break; }
            double d = 1.0;
            for (double q : pts) d = std::min(d, std::abs(st.x() - q));
            if (d > 4 * fine.eps) invariant = false;
        }
        if (invariant) {
            a.kind = AttractorKind::PeriodicLike;
            a.points = pts;
            return a;
        }
    }

    a.box_slope = std::log2(static_cast<double>(lv[levels - 1].size()) / static_cast<double>(lv[0].size())) /
                  static_cast<double>(levels - 1);
    if (a.box_slope >= opt.interval_slope) {
        auto runs_1 = cell_runs(coarsen(lv[1]));
        auto runs_next = cell_runs(lv[1]);
        bool stable = runs_c.size() <= opt.max_intervals && runs_next.size() == runs_c.size() && runs_1.size() == runs_c.size();
        bool into = true;
        for (const auto& r : runs_c) {
            for (const auto& im : f.image(r)) {
                bool inside = std::any_of(runs_c.begin(), runs_c.end(), [&](const Interval& t) {
                    return im.lo >= t.lo - a.eps && im.hi <= t.hi + a.eps;
                });
                if (!inside) into = false;
            }
        }
        if (stable && into) {
            a.kind = AttractorKind::CycleOfIntervals;
            a.intervals = runs_c;
            return a;
        }
        a.note = stable ? "interval runs not forward invariant" : "interval runs unstable under refinement";
        return a;
    }
    if (a.box_slope <= opt.cantor_slope && opt.atoms == 0) {
        a.kind = AttractorKind::Cantor;
        return a;
    }
    a.note = opt.atoms ? "isolated cells present" : "box-count slope between thresholds";
    return a;
}

inline AttractorEstimate classify_attractor(const PiecewiseMap& f, std::span<const double> points, double eps,
                                            std::size_t levels = 3, const ClassifyOptions& opt = {}) {
    double fine_eps = eps / std::ldexp(1.0, static_cast<int>(levels) - 1);
    CellGrid g(fine_eps);
    std::vector<char> seen(g.count(), 0);
    for (double x : points) seen[g.cell(x)] = 1;
    return classify_attractor(f, cells_from_flags(fine_eps, seen), levels, opt);
}

// ---------------------------------------------------------------------------
// Basin census

struct CensusOptions {
    std::size_t samples = 200;
    std::uint64_t seed = 1;
    std::size_t horizon = 1000000;
    double eps = 1.0 / 4096;
    std::size_t levels = 3;
    std::size_t max_period = 64;
    double cycle_tol = 1e-9;
    unsigned threads = 0; // 0: hardware concurrency
};

struct CensusCluster {
    AttractorEstimate attractor;
    std::size_t members = 0;
    double basin_fraction = 0.0;
    std::size_t generator_dissent = 0; // members whose signed sides differ from the majority
};

struct Census {
    std::vector<CensusCluster> clusters;
    std::size_t samples = 0;
    std::size_t truncated = 0;
    std::size_t degenerate = 0; // samples captured by a repelling cycle through rounding; not clustered
    std::size_t non_periodic_like = 0;
    std::size_t bound = 0;
    bool bound_ok = true;
    std::size_t ambiguous_merges = 0; // ClusterAmbiguity: merged within 2 cells but not identical
    std::vector<std::uint64_t> sample_numerators;
    std::uint64_t denominator = 0;
};

inline constexpr std::int64_t kCensusDenominator = 1000000007; // prime; k/P seeds never land on dyadic points

namespace detail {

struct SampleResult {
    CellSet coarse, fine;
    std::optional<std::vector<double>> cycle;
    std::vector<char> sides; // minus/plus flag per critical point
    bool truncated = false;
    bool degenerate = false; // rounded onto a repelling cycle
};

inline SampleResult census_sample(const PiecewiseMap& f, Rational x0, const CensusOptions& o) {
    SampleResult r;
    double fine_eps = o.eps / std::ldexp(1.0, static_cast<int>(o.levels) - 1);
    CellGrid gc(o.eps), gf(fine_eps);
    std::vector<char> sc(gc.count(), 0), sf(gf.count(), 0);
    const std::size_t W = 4 * o.max_period;
    std::vector<double> ring(W, 0.0);
    const auto& C = f.critical();
    std::vector<double> dm(C.size(), 2.0), dp(C.size(), 2.0);
    OrbitSource src(f, Seed(x0));
    std::size_t transient = o.horizon / 2, j = 0;
    double x;
    while (j <= o.horizon && src.next(x)) {
        if (j >= transient) {
            sc[gc.cell(x)] = 1;
            sf[gf.cell(x)] = 1;
            ring[j % W] = x;
            auto it = std::upper_bound(C.begin(), C.end(), x);
            if (it != C.end()) {
                std::size_t i = static_cast<std::size_t>(it - C.begin());
                dm[i] = std::min(dm[i], *it - x);
            }
            if (it != C.begin()) {
                std::size_t i = static_cast<std::size_t>(it - C.begin()) - 1;
                if (x > C[i]) dp[i] = std::min(dp[i], x - C[i]);
            }
        }
        ++j;
    }
    r.truncated = src.truncated();
    r.coarse = cells_from_flags(o.eps, sc);
    r.fine = cells_from_flags(fine_eps, sf);
    for (std::size_t i = 0; i < C.size(); ++i) {
        r.sides.push_back(dm[i] < o.eps);
        r.sides.push_back(dp[i] < o.eps);
    }
    if (!r.truncated && j - transient >= W) {
        std::size_t last = j - 1;
        auto at = [&](std::size_t k) { return ring[k % W]; };
        for (std::size_t q = 1; q <= o.max_period; ++q) {
            bool ok = true;
            for (std::size_t k = last; k + W > last + q && ok; --k)
                ok = std::abs(at(k) - at(k - q)) <= o.cycle_tol;
            if (ok) {
                std::vector<double> pts;
                for (std::size_t k = last + 1 - q; k <= last; ++k) pts.push_back(at(k));
                long double mult = 1;
                bool through = false;
                for (double p : pts) {
                    if (f.critical_near(p, 1e-9)) { through = true; break; }
                    mult *= std::abs(f.derivative(p));
                }
                if (!through && mult > 1.0L + 1e-6L) r.degenerate = true;
                else r.cycle = canonical_cycle(pts);
                break;
            }
        }
    }
    return r;
}

} // namespace detail

inline Census basin_census(const PiecewiseMap& f, const CensusOptions& o = {}) {
    if (o.samples < 1) fail(ErrorCode::PreconditionFailed, "sample count must be >= 1");
    if (o.levels < 2) fail(ErrorCode::PreconditionFailed, "levels must be >= 2");
    Census cs;
    cs.samples = o.samples;
    cs.denominator = static_cast<std::uint64_t>(kCensusDenominator);
    std::mt19937_64 rng(o.seed);
    for (std::size_t i = 0; i < o.samples; ++i)
        cs.sample_numerators.push_back(1 + rng() % static_cast<std::uint64_t>(kCensusDenominator - 1));

    std::vector<detail::SampleResult> res(o.samples);
    std::atomic<std::size_t> next{0};
    unsigned nt = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, o.samples));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i; (i = next.fetch_add(1)) < o.samples;)
                    res[i] = detail::census_sample(f, make_rational(static_cast<std::int64_t>(cs.sample_numerators[i]), kCensusDenominator), o);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);

    struct Cl {
        std::vector<std::size_t> members;
    };
    std::vector<Cl> cls;
    for (std::size_t i = 0; i < o.samples; ++i) {
        if (res[i].truncated) ++cs.truncated;
        if (res[i].degenerate) {
            ++cs.degenerate;
            continue;
        }
        bool placed = false;
        for (auto& c : cls) {
            const auto& rep = res[c.members.front()].coarse;
            if (hausdorff_cells(rep, res[i].coarse) <= 2) {
                if (!(rep == res[i].coarse)) ++cs.ambiguous_merges;
                c.members.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) cls.push_back({{i}});
    }

    std::size_t used = o.samples - cs.degenerate;
    for (const auto& c : cls) {
        CensusCluster cc;
        cc.members = c.members.size();
        cc.basin_fraction = static_cast<double>(cc.members) / static_cast<double>(used);
        std::size_t periodic = 0;
        CellSet fine{res[c.members.front()].fine.eps, {}}, coarse{o.eps, {}};
        for (auto i : c.members) {
            if (res[i].cycle) ++periodic;
            fine = unite(fine, res[i].fine);
            coarse = unite(coarse, res[i].coarse);
        }
        auto& a = cc.attractor;
        if (periodic == c.members.size()) {
            a.kind = AttractorKind::PeriodicLike;
            a.points = *res[c.members.front()].cycle;
            a.eps = o.eps;
            a.cells = coarse;
            for (double p : a.points)
                if (auto ci = f.critical_near(p, o.cycle_tol); ci && !f.continuous_at(*ci)) a.one_sided = true;
        } else if (periodic == 0) {
            a = classify_attractor(f, fine, o.levels);
        } else {
            a.kind = AttractorKind::Unresolved;
            a.eps = o.eps;
            a.cells = coarse;
            a.note = "mixed periodic and aperiodic members";
        }
        if (a.kind != AttractorKind::PeriodicLike) {
            std::size_t nflags = f.critical_count() * 2;
            std::vector<std::size_t> votes(nflags, 0);
            for (auto i : c.members)
                for (std::size_t k = 0; k < nflags; ++k) votes[k] += res[i].sides[k];
            std::vector<char> major(nflags);
            for (std::size_t k = 0; k < nflags; ++k) {
                major[k] = 2 * votes[k] > c.members.size();
                if (major[k]) a.generators.push_back({k / 2, k % 2 ? Side::Plus : Side::Minus});
            }
            for (auto i : c.members)
                for (std::size_t k = 0; k < nflags; ++k)
                    if (static_cast<bool>(res[i].sides[k]) != static_cast<bool>(major[k])) {
                        ++cc.generator_dissent;
                        break;
                    }
        }
        cs.clusters.push_back(std::move(cc));
    }
    for (const auto& c : cs.clusters)
        if (c.attractor.kind != AttractorKind::PeriodicLike) ++cs.non_periodic_like;
    std::size_t nc = f.critical_count();
    cs.bound = f.is_continuous() ? nc : nc + (std::size_t{1} << (2 * nc));
    cs.bound_ok = cs.non_periodic_like <= cs.bound;
    return cs;
}

// ---------------------------------------------------------------------------
// Wandering intervals

inline HomtervalVerdict classify_homterval(const PiecewiseMap& f, Interval J, std::size_t horizon, std::size_t max_period = 8) {
    std::vector<std::vector<double>> orbits;
    for (const auto& a : detect_periodic_like(f, max_period))
        if (a.kind == AttractorKind::PeriodicLike) orbits.push_back(a.points);
    return classify_homterval(f, J, horizon, orbits);
}

struct WanderingCheck {
    bool matched = false;
    std::vector<CriticalValue> V;
    std::size_t distance = 0;                 // Hausdorff cell distance to the best closure
    std::vector<std::pair<std::vector<CriticalValue>, std::size_t>> tried;
    bool meets_critical_cell = false;         // the matched closure contains the cell of some c
    std::size_t subset_bound = 0;             // 2^(2#C)
    CellSet omega, closure;
};

inline WanderingCheck wandering_attractor_check(const PiecewiseMap& f, Interval J, std::size_t n, double eps) {
    WanderingCheck w;
    std::size_t nc = f.critical_count();
    w.subset_bound = std::size_t{1} << (2 * nc);
    w.omega = omega_limit_estimate(f, J.mid(), n / 2, n, eps).cells;
    std::vector<CriticalValue> all;
    std::vector<CellSet> single;
    for (std::size_t i = 0; i < nc; ++i)
        for (Side s : {Side::Minus, Side::Plus}) {
            all.push_back({i, s});
            single.push_back(orbit_cells(f, f.one_sided_limit(i, s), n, eps));
        }
    std::size_t best = std::numeric_limits<std::size_t>::max();
    CellSet best_set;
    for (std::size_t mask = 1; mask < (std::size_t{1} << all.size()); ++mask) {
        std::vector<CriticalValue> V;
        CellSet u{eps, {}};
        for (std::size_t k = 0; k < all.size(); ++k)
            if (mask >> k & 1) {
                V.push_back(all[k]);
                u = unite(u, single[k]);
            }
        std::size_t d = hausdorff_cells(w.omega, u);
        w.tried.push_back({V, d});
        if (d < best || (d == best && V.size() > w.V.size())) {
            best = d;
            w.V = V;
            best_set = u;
        }
    }
    w.distance = best;
    w.closure = best_set;
    w.matched = best <= 2;
    CellGrid g(eps);
    for (double c : f.critical())
        if (best_set.contains(g.cell(c))) w.meets_critical_cell = true;
    return w;
}

} // namespace ivdyn

#endif
