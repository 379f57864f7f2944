#ifndef IVDYN_STRUCTURE_HPP
#define IVDYN_STRUCTURE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attractor_types.hpp"
#include "map.hpp"
#include "observable.hpp"
#include "orbit.hpp"
#include "orbit_stats.hpp"

namespace ivdyn {

namespace detail {

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// f^j(x) for a point whose first j iterates avoid C.
template <class T>
T iterate_raw(const PiecewiseMap& f, T x, std::size_t j) {
    for (std::size_t k = 0; k < j; ++k) {
        T y = f.raw(f.branch_index(static_cast<double>(x)), x);
        x = y < 0 ? T(0) : (y > 1 ? T(1) : y);
    }
    return x;
}

// An interval of monotonicity and continuity of f^j: domain [a,b] with the
// closure values ya = f^j(a+), yb = f^j(b-).
struct MonoPiece {
    double a = 0, b = 0;
    double ya = 0, yb = 0;
    std::size_t j = 0;
    bool increasing() const { return yb >= ya; }
    double lo() const { return std::min(ya, yb); }
    double hi() const { return std::max(ya, yb); }
};

// Domain point x in [a,b] with f^j(x) = y.
inline double pullback(const PiecewiseMap& f, const MonoPiece& p, double y) {
    if (y == p.ya) return p.a;
    if (y == p.yb) return p.b;
    if (p.j == 0) return y;
    long double lo = p.a, hi = p.b;
    bool inc = p.increasing();
    for (int it = 0; it < 200; ++it) {
        long double m = lo + (hi - lo) / 2;
        if (!(m > lo && m < hi)) break;
        if (static_cast<double>(m) <= p.a || static_cast<double>(m) >= p.b) break;
        long double v = iterate_raw<long double>(f, m, p.j);
        if ((v < y) == inc) lo = m; else hi = m;
    }
    return static_cast<double>(lo + (hi - lo) / 2);
}

// Splits a piece at every cut value lying strictly inside its image.
inline void split_piece(const PiecewiseMap& f, const MonoPiece& p, std::span<const double> cuts, std::vector<MonoPiece>& out,
                        double tol = 0.0) {
    double lo = p.lo() + tol, hi = p.hi() - tol;
    auto first = std::upper_bound(cuts.begin(), cuts.end(), lo);
    auto last = std::lower_bound(cuts.begin(), cuts.end(), hi);
    if (first >= last) {
        out.push_back(p);
        return;
    }
    std::vector<double> ys(first, last);
    if (!p.increasing()) std::reverse(ys.begin(), ys.end());
    double a = p.a, ya = p.ya;
    for (double y : ys) {
        double x = pullback(f, p, y);
        x = std::min(std::max(x, a), p.b);
        out.push_back({a, x, ya, y, p.j});
        a = x;
        ya = y;
    }
    out.push_back({a, p.b, ya, p.yb, p.j});
}

// One more iterate of a piece whose image has no critical point inside.
inline MonoPiece advance_piece(const PiecewiseMap& f, const MonoPiece& p, std::size_t* branch_out = nullptr) {
    double lo = p.lo(), hi = p.hi();
    std::size_t br = f.branch_index(0.5 * (lo + hi));
    if (lo == hi) br = f.branch_index(lo);
    MonoPiece q = p;
    q.ya = f.closure_value(br, p.ya);
    q.yb = f.closure_value(br, p.yb);
    q.j = p.j + 1;
    if (branch_out) *branch_out = br;
    return q;
}

inline std::vector<Interval> merge_intervals(std::vector<Interval> v, double join = 0.0) {
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (const auto& iv : v) {
        if (!out.empty() && iv.lo <= out.back().hi + join) out.back().hi = std::max(out.back().hi, iv.hi);
        else out.push_back(iv);
    }
    return out;
}

// Parts of J not covered by the sorted, merged list U.
inline std::vector<Interval> uncovered(const std::vector<Interval>& J, const std::vector<Interval>& U) {
    std::vector<Interval> res;
    for (const auto& comp : J) {
        double cur = comp.lo;
        for (const auto& u : U) {
            if (u.hi <= cur) continue;
            if (u.lo >= comp.hi) break;
            if (u.lo > cur) res.push_back({cur, std::min(u.lo, comp.hi)});
            cur = std::max(cur, u.hi);
            if (cur >= comp.hi) break;
        }
        if (cur < comp.hi) res.push_back({cur, comp.hi});
    }
    return res;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Periodic orbits

struct PeriodicOrbit {
    std::size_t period = 0;
    std::vector<double> points; // x, f(x), ..., in dynamical order
    double multiplier = 0.0;    // |(f^q)'| along the orbit
    std::vector<double> means;  // one per registered observable
    bool through_critical = false;
    bool one_sided = false;     // passes through a discontinuity: periodic-like, not periodic
    double residual = 0.0;      // |f^q(x) - x|
};

struct PeriodicOrbitTable {
    std::size_t max_period = 0;
    std::vector<std::string> observables;
    std::vector<std::vector<PeriodicOrbit>> by_period; // index q, entry 0 unused
    std::vector<std::size_t> fixed_point_count;        // #Fix(f^q), index q

    std::vector<PeriodicOrbit> all() const {
        std::vector<PeriodicOrbit> v;
        for (const auto& p : by_period) v.insert(v.end(), p.begin(), p.end());
        return v;
    }
};

namespace detail {

struct WordLap {
    double a, b, ya, yb;
    std::vector<std::uint16_t> word;
};

template <class T>
T along_word(const PiecewiseMap& f, const std::vector<std::uint16_t>& w, T x, std::size_t upto) {
    for (std::size_t i = 0; i < upto; ++i) {
        T y = f.raw(w[i], x);
        x = y < 0 ? T(0) : (y > 1 ? T(1) : y);
    }
    return x;
}

inline double word_pullback(const PiecewiseMap& f, const WordLap& L, double y) {
    if (y == L.ya) return L.a;
    if (y == L.yb) return L.b;
    bool inc = L.yb >= L.ya;
    long double lo = L.a, hi = L.b;
    for (int it = 0; it < 200; ++it) {
        long double m = lo + (hi - lo) / 2;
        if (!(m > lo && m < hi)) break;
        long double v = along_word<long double>(f, L.word, m, L.word.size());
        if ((v < y) == inc) lo = m; else hi = m;
    }
    return static_cast<double>(lo + (hi - lo) / 2);
}

// Splits L at the critical points inside its image and applies one more branch to each part.
inline void advance_word_lap(const PiecewiseMap& f, const WordLap& L, std::vector<WordLap>& out) {
    const auto& C = f.critical();
    double lo = std::min(L.ya, L.yb), hi = std::max(L.ya, L.yb);
    auto first = std::upper_bound(C.begin(), C.end(), lo);
    auto last = std::lower_bound(C.begin(), C.end(), hi);
    std::vector<double> ys(first, last);
    bool inc = L.yb >= L.ya;
    if (!inc) std::reverse(ys.begin(), ys.end());
    double a = L.a, ya = L.ya;
    auto emit = [&](double a0, double b0, double y0, double y1) {
        std::size_t br = f.branch_index(0.5 * (y0 + y1));
        WordLap n{a0, b0, f.closure_value(br, y0), f.closure_value(br, y1), L.word};
        n.word.push_back(static_cast<std::uint16_t>(br));
        out.push_back(std::move(n));
    };
    for (double y : ys) {
        double x = L.word.empty() ? y : word_pullback(f, L, y);
        emit(a, x, ya, y);
        a = x;
        ya = y;
    }
    emit(a, L.b, ya, L.yb);
}

// Laps of f^q for q = 1..Q, each with its branch word.
inline std::vector<std::vector<WordLap>> word_laps(const PiecewiseMap& f, std::size_t Q, std::size_t max_laps = 1u << 22) {
    std::vector<std::vector<WordLap>> laps(Q + 1);
    for (std::size_t b = 0; b < f.branches().size(); ++b) {
        const auto& br = f.branches()[b];
        laps[1].push_back({br.lo, br.hi, f.closure_value(b, br.lo), f.closure_value(b, br.hi),
                           {static_cast<std::uint16_t>(b)}});
    }
    for (std::size_t q = 2; q <= Q; ++q) {
        for (const auto& L : laps[q - 1]) advance_word_lap(f, L, laps[q]);
        if (laps[q].size() > max_laps) fail(ErrorCode::PreconditionFailed, "lap count exceeds the enumeration guard");
    }
    return laps;
}

} // namespace detail

inline PeriodicOrbitTable periodic_orbits(const PiecewiseMap& f, std::size_t Q, const std::vector<Observable>& observables = {}) {
    if (Q < 1) fail(ErrorCode::PreconditionFailed, "Q must be >= 1");
    PeriodicOrbitTable table;
    table.max_period = Q;
    for (const auto& o : observables) table.observables.push_back(o.id());
    table.by_period.assign(Q + 1, {});
    table.fixed_point_count.assign(Q + 1, 0);
    auto laps = detail::word_laps(f, Q);
    const auto& C = f.critical();
    const double dup_tol = 1e-10;

    for (std::size_t q = 1; q <= Q; ++q) {
        struct Root {
            double x;
            int side; // -1: left one-sided root at a critical point, +1 right, 0 interior
            const detail::WordLap* lap;
        };
        std::vector<Root> roots;
        for (const auto& L : laps[q]) {
            auto g = [&](long double x) { return detail::along_word<long double>(f, L.word, x, q) - x; };
            const int K = 8;
            long double xs[K + 1], gs[K + 1];
            long double gmax = 0;
            for (int s = 0; s <= K; ++s) {
                xs[s] = (s == K) ? static_cast<long double>(L.b) : L.a + (static_cast<long double>(L.b) - L.a) * s / K;
                gs[s] = g(xs[s]);
                gmax = std::max(gmax, std::abs(gs[s]));
            }
            if (L.b - L.a > 1e-9 && gmax <= 1e-13L)
                fail(ErrorCode::DegenerateFamily, "f^" + std::to_string(q) + " fixes an interval near x = " +
                                                      PiecewiseMap::fmt(L.a));
            auto side_of = [&](double x) {
                for (double c : C) {
                    if (x == c && x == L.a) return 1;
                    if (x == c && x == L.b) return -1;
                }
                return 0;
            };
            for (int s = 0; s <= K; ++s) {
                if (gs[s] == 0) roots.push_back({static_cast<double>(xs[s]), side_of(static_cast<double>(xs[s])), &L});
                if (s < K && gs[s] != 0 && gs[s + 1] != 0 && ((gs[s] < 0) != (gs[s + 1] < 0))) {
                    long double lo = xs[s], hi = xs[s + 1];
                    bool neg_lo = gs[s] < 0;
                    for (int it = 0; it < 200; ++it) {
                        long double m = lo + (hi - lo) / 2;
                        if (!(m > lo && m < hi)) break;
                        long double gm = g(m);
                        if (gm == 0) { lo = hi = m; break; }
                        if ((gm < 0) == neg_lo) lo = m; else hi = m;
                    }
                    // choose the double nearest the bracket with the smaller residual
                    double c1 = static_cast<double>(lo), c2 = static_cast<double>(hi);
                    double x = std::abs(g(c1)) <= std::abs(g(c2)) ? c1 : c2;
                    roots.push_back({x, 0, &L});
                }
            }
        }
        // deduplicate points shared by adjacent laps
        std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) { return a.x < b.x || (a.x == b.x && a.side < b.side); });
        std::vector<Root> uniq;
        for (const auto& r : roots) {
            if (!uniq.empty() && std::abs(r.x - uniq.back().x) <= dup_tol &&
                (r.side == uniq.back().side || (r.side == 0) || (uniq.back().side == 0 && f.critical_near(r.x, 0.0) == std::nullopt)))
                continue;
            uniq.push_back(r);
        }
        table.fixed_point_count[q] = uniq.size();

        for (const auto& r : uniq) {
            const auto& w = r.lap->word;
            std::vector<double> pts(q);
            long double x = r.x;
            bool lower = false;
            for (std::size_t i = 0; i < q; ++i) {
                pts[i] = static_cast<double>(x);
                if (i > 0 && q % i == 0 && std::abs(pts[i] - pts[0]) <= dup_tol) { lower = true; break; }
                long double y = f.raw(w[i], x);
                x = y < 0 ? 0.0L : (y > 1 ? 1.0L : y);
            }
            if (lower) continue;
            double resid = static_cast<double>(std::abs(x - static_cast<long double>(r.x)));
            bool known = false;
            for (const auto& o : table.by_period[q]) {
                for (double p : o.points)
                    if (std::abs(p - r.x) <= dup_tol) { known = true; break; }
                if (known) break;
            }
            if (known) continue;
            PeriodicOrbit po;
            po.period = q;
            po.points = pts;
            po.residual = resid;
            long double mult = 1;
            for (std::size_t i = 0; i < q; ++i) {
                mult *= std::abs(f.branches()[w[i]].derivative(static_cast<long double>(pts[i])));
                if (auto ci = f.critical_near(pts[i], 1e-12)) {
                    po.through_critical = true;
                    if (!f.continuous_at(*ci)) po.one_sided = true;
                }
            }
            po.multiplier = static_cast<double>(mult);
            for (const auto& o : observables) {
                long double s = 0;
                for (double p : pts) s += o(p);
                po.means.push_back(static_cast<double>(s / static_cast<long double>(q)));
            }
            table.by_period[q].push_back(std::move(po));
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// First-return maps

struct ReturnBranch {
    Interval domain;
    std::size_t time = 0;
    Monotonicity mono = Monotonicity::Increasing;
    Interval image;
};

struct ReturnMap {
    Interval base;
    std::vector<ReturnBranch> branches;
    std::size_t horizon = 0;
    std::vector<Interval> residual;
    double residual_length = 0.0;
};

inline ReturnMap first_return_map(const PiecewiseMap& f, Interval I, std::size_t horizon, double min_branch_width = 1e-9) {
    if (!(I.lo < I.hi && I.lo >= 0.0 && I.hi <= 1.0)) fail(ErrorCode::PreconditionFailed, "base interval must be a subinterval of [0,1]");
    if (horizon < 1) fail(ErrorCode::PreconditionFailed, "horizon must be >= 1");
    ReturnMap rm;
    rm.base = I;
    rm.horizon = horizon;
    std::vector<double> crit(f.critical().begin(), f.critical().end());
    std::vector<double> ends{I.lo, I.hi};
    std::vector<detail::MonoPiece> live{{I.lo, I.hi, I.lo, I.hi, 0}};
    while (!live.empty()) {
        std::vector<detail::MonoPiece> next;
        for (const auto& p : live) {
            std::vector<detail::MonoPiece> parts;
            detail::split_piece(f, p, crit, parts);
            for (const auto& part : parts) {
                detail::MonoPiece q = detail::advance_piece(f, part);
                std::vector<detail::MonoPiece> sub;
                detail::split_piece(f, q, ends, sub);
                for (const auto& s : sub) {
                    bool inside = s.lo() >= I.lo && s.hi() <= I.hi;
                    if (inside) {
                        rm.branches.push_back({{s.a, s.b}, s.j, s.increasing() ? Monotonicity::Increasing : Monotonicity::Decreasing,
                                               {s.lo(), s.hi()}});
                    } else if (s.j >= horizon || s.b - s.a < min_branch_width) {
                        rm.residual.push_back({s.a, s.b});
                    } else {
                        next.push_back(s);
                    }
                }
            }
        }
        live = std::move(next);
    }
    std::sort(rm.branches.begin(), rm.branches.end(), [](const ReturnBranch& a, const ReturnBranch& b) { return a.domain.lo < b.domain.lo; });
    rm.residual = detail::merge_intervals(rm.residual);
    for (const auto& r : rm.residual) rm.residual_length += r.width();
    return rm;
}

inline bool is_full_branch(const ReturnMap& rm, double tol = 1e-9) {
    if (rm.branches.empty()) return false;
    return std::all_of(rm.branches.begin(), rm.branches.end(), [&](const ReturnBranch& b) {
        return b.image.lo <= rm.base.lo + tol && b.image.hi >= rm.base.hi - tol;
    });
}

// ---------------------------------------------------------------------------
// Homtervals

// Forward orbits of the critical values f(c-) and f(c+), up to n points each.
inline std::vector<std::vector<double>> critical_value_orbits(const PiecewiseMap& f, std::size_t n) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < f.critical_count(); ++i)
        for (Side s : {Side::Minus, Side::Plus}) {
            auto r = iterate_orbit(f, f.one_sided_limit(i, s), n > 0 ? n - 1 : 0);
            out.push_back(std::move(r.points));
        }
    return out;
}

// Intervals of length >= min_len on which f^j is a homeomorphism for j <= n.
// Pieces are cut at C and also at the forward critical orbit, so a candidate
// never straddles a point of the postcritical set.
inline std::vector<Interval> find_homtervals(const PiecewiseMap& f, std::size_t n, double min_len) {
    if (n < 1) fail(ErrorCode::PreconditionFailed, "n must be >= 1");
    std::vector<double> cuts(f.critical().begin(), f.critical().end());
    for (auto& orb : critical_value_orbits(f, n)) cuts.insert(cuts.end(), orb.begin(), orb.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<detail::MonoPiece> live, tmp;
    detail::split_piece(f, {0.0, 1.0, 0.0, 1.0, 0}, cuts, tmp);
    for (const auto& p : tmp)
        if (p.b - p.a >= min_len) live.push_back(p);
    for (std::size_t j = 0; j < n && !live.empty(); ++j) {
        std::vector<detail::MonoPiece> next;
        for (const auto& p : live) {
            auto q = detail::advance_piece(f, p);
            tmp.clear();
            // cuts within rounding distance of an endpoint are the same point
            detail::split_piece(f, q, cuts, tmp, 1e-12);
            for (const auto& s : tmp)
                if (s.b - s.a >= min_len) next.push_back(s);
        }
        live = std::move(next);
    }
    std::vector<Interval> out;
    for (const auto& p : live) out.push_back({p.a, p.b});
    std::sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    return out;
}

enum class HomtervalClass { Wandering, BasinOfPeriodicLike, Undecided };

inline const char* to_string(HomtervalClass k) {
    switch (k) {
    case HomtervalClass::Wandering: return "Wandering";
    case HomtervalClass::BasinOfPeriodicLike: return "BasinOfPeriodicLike";
    case HomtervalClass::Undecided: return "Undecided";
    }
    return "?";
}

struct HomtervalVerdict {
    HomtervalClass kind = HomtervalClass::Undecided;
    bool images_disjoint = false;
    bool converges = false;
    std::size_t horizon = 0;
    std::vector<Interval> images; // f^j(J), j = 0..horizon, outward rounded
};

// Outward-rounded images f^j(J) for j = 0..n; stops early if an image meets C inside.
inline std::vector<Interval> interval_images(const PiecewiseMap& f, Interval J, std::size_t n, bool* hit_critical = nullptr) {
    std::vector<Interval> out{J};
    if (hit_critical) *hit_critical = false;
    for (std::size_t j = 0; j < n; ++j) {
        auto im = f.image(out.back());
        if (im.size() != 1) {
            if (hit_critical) *hit_critical = true;
            break;
        }
        out.push_back(im[0]);
    }
    return out;
}

inline bool pairwise_disjoint(std::vector<Interval> v) {
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i].lo <= v[i - 1].hi) return false;
    return true;
}

inline HomtervalVerdict classify_homterval(const PiecewiseMap& f, Interval J, std::size_t horizon,
                                           const std::vector<std::vector<double>>& periodic_like_orbits) {
    HomtervalVerdict v;
    v.horizon = horizon;
    bool hit = false;
    v.images = interval_images(f, J, horizon, &hit);
    v.images_disjoint = !hit && pairwise_disjoint(v.images);
    auto orb = iterate_orbit(f, J.mid(), horizon);
    const auto& pts = orb.points;
    for (const auto& o : periodic_like_orbits) {
        if (o.empty() || pts.size() < o.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < o.size() && ok; ++k) {
            double x = pts[pts.size() - 1 - k];
            double d = 1.0;
            for (double p : o) d = std::min(d, std::abs(x - p));
            ok = d <= 1e-8;
        }
        if (ok) { v.converges = true; break; }
    }
    if (v.converges) v.kind = HomtervalClass::BasinOfPeriodicLike;
    else if (v.images_disjoint) v.kind = HomtervalClass::Wandering;
    else v.kind = HomtervalClass::Undecided;
    return v;
}

// ---------------------------------------------------------------------------
// Lap numbers and entropy

struct LapCount {
    std::vector<long double> laps; // laps[n] = number of laps of f^n, laps[0] = 1
    std::size_t max_n = 0;
    std::size_t image_types = 0;   // distinct lap images at the last step
};

// Laps of f^n on the union of the given domain intervals. Laps are grouped by
// their image interval, since a lap's future splitting depends only on its image.
inline LapCount lap_counts(const PiecewiseMap& f, std::size_t n_max, std::vector<Interval> domain = {{0.0, 1.0}}) {
    LapCount lc;
    lc.max_n = n_max;
    std::map<std::pair<double, double>, long double> types;
    const auto& C = f.critical();
    long double total0 = 0;
    for (const auto& d : domain) {
        // a domain interval containing critical points is already several laps of f^0's restriction
        types[{d.lo, d.hi}] += 1;
        total0 += 1;
    }
    lc.laps.push_back(total0);
    for (std::size_t n = 1; n <= n_max; ++n) {
        std::map<std::pair<double, double>, long double> next;
        long double total = 0;
        for (const auto& [iv, cnt] : types) {
            double lo = iv.first, hi = iv.second;
            auto first = std::upper_bound(C.begin(), C.end(), lo);
            auto last = std::lower_bound(C.begin(), C.end(), hi);
            double a = lo;
            auto emit = [&](double u, double v) {
                std::size_t br = f.branch_index(0.5 * (u + v));
                double fu = f.closure_value(br, u), fv = f.closure_value(br, v);
                if (fu > fv) std::swap(fu, fv);
                next[{fu, fv}] += cnt;
                total += cnt;
            };
            for (auto it = first; it < last; ++it) {
                emit(a, *it);
                a = *it;
            }
            emit(a, hi);
        }
        types = std::move(next);
        lc.laps.push_back(total);
    }
    lc.image_types = types.size();
    return lc;
}

// Smallest zero in (0,1) of the kneading determinant of a continuous unimodal
// map, from n terms of the critical itinerary; 1 when there is none.
inline double kneading_root(const PiecewiseMap& f, std::size_t n) {
    double c = f.critical()[0];
    auto eps = [&](double x) {
        if (x == c) return 0;
        std::size_t b = f.branch_index(x);
        return f.branches()[b].increasing() ? 1 : -1;
    };
    std::vector<long double> th{1.0L};
    auto orb = iterate_orbit(f, f.one_sided_limit(0, Side::Minus), n, true);
    long double s = 1;
    for (std::size_t k = 0; k < n; ++k) {
        double x = k < orb.points.size() ? orb.points[k] : c;
        s *= eps(x);
        th.push_back(s);
    }
    auto D = [&](long double t) {
        long double acc = 0;
        for (std::size_t k = th.size(); k-- > 0;) acc = acc * t + th[k];
        return acc;
    };
    const int N = 20000;
    long double prev = D(0);
    for (int i = 1; i <= N; ++i) {
        long double t = static_cast<long double>(i) / N;
        if (t >= 1) break;
        long double v = D(t);
        if (v == 0) return static_cast<double>(t);
        if ((v < 0) != (prev < 0)) {
            long double lo = static_cast<long double>(i - 1) / N, hi = t;
            for (int it = 0; it < 100; ++it) {
                long double m = (lo + hi) / 2;
                if ((D(m) < 0) == (D(lo) < 0)) lo = m; else hi = m;
            }
            return static_cast<double>((lo + hi) / 2);
        }
        prev = v;
    }
    return 1.0;
}

struct EntropyEstimate {
    LapCount laps;
    double slope = 0.0;                 // least-squares slope of log l(n) over the last third
    std::optional<double> kneading;     // -log of the kneading-determinant root, when applicable
    double h = 0.0;
    std::string method;
    bool submultiplicative = true;
};

inline EntropyEstimate lap_entropy(const PiecewiseMap& f, std::size_t n_max, std::vector<Interval> domain = {{0.0, 1.0}}) {
    if (n_max < 8) fail(ErrorCode::PreconditionFailed, "n_max must be >= 8");
    EntropyEstimate e;
    e.laps = lap_counts(f, n_max, domain);
    const auto& l = e.laps.laps;
    std::size_t first = n_max - n_max / 3;
    long double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t n = first; n <= n_max; ++n) {
        long double x = n, y = std::log(l[n]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++m;
    }
    e.slope = static_cast<double>((m * sxy - sx * sy) / (m * sxx - sx * sx));
    for (std::size_t a = 1; a <= n_max; ++a)
        for (std::size_t b = 1; a + b <= n_max; ++b)
            if (l[a + b] > l[a] * l[b]) e.submultiplicative = false;
    bool full = domain.size() == 1 && domain[0].lo == 0.0 && domain[0].hi == 1.0;
    if (full && f.critical_count() == 1 && f.is_continuous()) {
        double t = kneading_root(f, n_max);
        e.kneading = t >= 1.0 ? 0.0 : -std::log(t);
        e.h = *e.kneading;
        e.method = "kneading";
    } else {
        e.h = e.slope;
        e.method = "lap-slope";
    }
    return e;
}

// ---------------------------------------------------------------------------
// Strong transitivity

struct ProbeResult {
    Interval probe;
    bool covered = false;
    std::size_t union_steps = 0; // first n with f^0 .. f^n of the probe covering J
    std::size_t cover_time = 0;  // number of images P, f(P), ... up to the first single image covering J
    double uncovered_length = 0.0;
    std::vector<Interval> residue;
};

struct TransitivityVerdict {
    bool strongly_transitive = false;
    std::vector<ProbeResult> probes;
};

inline std::vector<Interval> image_of_union(const PiecewiseMap& f, const std::vector<Interval>& U) {
    std::vector<Interval> out;
    for (const auto& u : U)
        for (const auto& im : f.image(u)) out.push_back(im);
    return detail::merge_intervals(std::move(out));
}

inline bool covers_up_to(const std::vector<Interval>& J, const std::vector<Interval>& U, double eps,
                         std::vector<Interval>* residue = nullptr, double* length = nullptr) {
    auto res = detail::uncovered(J, U);
    double total = 0;
    bool ok = true;
    for (const auto& r : res) {
        total += r.width();
        if (r.width() > eps) ok = false;
    }
    if (total > eps) ok = false;
    if (residue) *residue = res;
    if (length) *length = total;
    return ok;
}

inline TransitivityVerdict strong_transitivity_check(const PiecewiseMap& f, std::vector<Interval> J,
                                                     const std::vector<Interval>& probes, std::size_t N, double eps) {
    J = detail::merge_intervals(std::move(J));
    TransitivityVerdict v;
    v.strongly_transitive = !probes.empty();
    for (const auto& P : probes) {
        ProbeResult r;
        r.probe = P;
        std::vector<Interval> img{P};
        std::vector<Interval> uni{P};
        for (std::size_t n = 0; n <= N; ++n) {
            if (n > 0) {
                img = image_of_union(f, img);
                std::vector<Interval> all = uni;
                all.insert(all.end(), img.begin(), img.end());
                uni = detail::merge_intervals(std::move(all));
            }
            if (!r.cover_time && covers_up_to(J, img, eps)) r.cover_time = n + 1;
            if (!r.covered && covers_up_to(J, uni, eps)) {
                r.covered = true;
                r.union_steps = n;
            }
            if (r.covered && r.cover_time) break;
        }
        covers_up_to(J, uni, eps, &r.residue, &r.uncovered_length);
        if (!r.covered) v.strongly_transitive = false;
        v.probes.push_back(std::move(r));
    }
    return v;
}

// ---------------------------------------------------------------------------
// Birkhoff maximum over an attractor

struct BirkhoffMax {
    double value = 0.0;
    std::vector<double> trace; // trace[q] = best value using periods <= q (CycleOfIntervals)
    std::string method;
};

inline BirkhoffMax birkhoff_max_oracle(const PiecewiseMap& f, const AttractorEstimate& A, const Observable& phi,
                                       std::size_t Q, std::size_t cantor_horizon = 1000000) {
    BirkhoffMax r;
    if (phi.is_constant()) {
        r.value = phi.max_value();
        r.method = "constant";
        return r;
    }
    switch (A.kind) {
    case AttractorKind::Unresolved:
        fail(ErrorCode::NotClassified, "the attractor estimate is Unresolved");
    case AttractorKind::PeriodicLike: {
        long double s = 0;
        for (double p : A.points) s += phi(p);
        r.value = static_cast<double>(s / static_cast<long double>(A.points.size()));
        r.method = "orbit-mean";
        return r;
    }
    case AttractorKind::Cantor: {
        if (A.generators.empty()) fail(ErrorCode::NotClassified, "Cantor estimate without generators");
        const auto& g = A.generators.front();
        double v = f.one_sided_limit(g.critical_index, g.side);
        auto s = birkhoff_envelope(f, v, phi, cantor_horizon);
        r.value = s.averages.back();
        r.method = "critical-orbit-average";
        return r;
    }
    case AttractorKind::CycleOfIntervals: {
        if (Q < 8) fail(ErrorCode::PreconditionFailed, "Q must be >= 8");
        auto table = periodic_orbits(f, Q, {phi});
        double slack = A.eps;
        auto inside = [&](double x) {
            return std::any_of(A.intervals.begin(), A.intervals.end(),
                               [&](const Interval& iv) { return x >= iv.lo - slack && x <= iv.hi + slack; });
        };
        double best = -std::numeric_limits<double>::infinity();
        r.trace.assign(Q + 1, best);
        for (std::size_t q = 1; q <= Q; ++q) {
            for (const auto& o : table.by_period[q])
                if (std::all_of(o.points.begin(), o.points.end(), inside)) best = std::max(best, o.means[0]);
            r.trace[q] = best;
        }
        r.value = best;
        r.method = "periodic-orbit-max";
        return r;
    }
    }
    return r;
}

} // namespace ivdyn

#endif
