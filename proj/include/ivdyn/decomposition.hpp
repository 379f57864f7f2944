#ifndef IVDYN_DECOMPOSITION_HPP
#define IVDYN_DECOMPOSITION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "map.hpp"
#include "orbit_stats.hpp"

namespace ivdyn {

// Cell graph of f at resolution eps. Cells are the closed intervals [i eps, (i+1) eps];
// the targets of a cell are the cells whose interior meets the outward-rounded image,
// so every image point lies in the union of the closed target cells.
struct GridDynamics {
    double eps = 0.0;
    std::size_t count = 0;
    std::vector<std::uint32_t> offset;                    // ranges of cell i: [offset[i], offset[i+1])
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges; // inclusive target cell ranges

    template <class Fn>
    void for_targets(std::size_t i, Fn&& fn) const {
        for (std::uint32_t r = offset[i]; r < offset[i + 1]; ++r)
            for (std::uint32_t t = ranges[r].first; t <= ranges[r].second; ++t) fn(static_cast<std::size_t>(t));
    }
    bool has_edge(std::size_t i, std::size_t j) const {
        for (std::uint32_t r = offset[i]; r < offset[i + 1]; ++r)
            if (j >= ranges[r].first && j <= ranges[r].second) return true;
        return false;
    }
    Interval cell(std::size_t i) const {
        return {static_cast<double>(i) * eps, std::min(1.0, static_cast<double>(i + 1) * eps)};
    }
    std::size_t cell_of(double x) const { return CellGrid(eps).cell(x); }
};

inline GridDynamics grid_graph(const PiecewiseMap& f, double eps) {
    if (!(eps >= 1e-5)) fail(ErrorCode::ResolutionTooFine, "grid resolution below 1e-5");
    if (eps > 1.0) fail(ErrorCode::PreconditionFailed, "grid resolution above 1");
    GridDynamics g;
    g.eps = eps;
    g.count = CellGrid(eps).count();
    g.offset.reserve(g.count + 1);
    g.offset.push_back(0);
    const auto last = static_cast<std::uint32_t>(g.count - 1);
    auto clampc = [&](double v) {
        if (v <= 0) return std::uint32_t{0};
        return static_cast<std::uint32_t>(std::min<double>(v, last));
    };
    for (std::size_t i = 0; i < g.count; ++i) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> rs;
        for (const auto& im : f.image(g.cell(i))) {
            std::uint32_t a = clampc(std::floor(im.lo / eps));
            std::uint32_t b = im.hi > im.lo ? clampc(std::ceil(im.hi / eps) - 1) : a;
            if (b < a) b = a;
            rs.push_back({a, b});
        }
        std::sort(rs.begin(), rs.end());
        std::vector<std::pair<std::uint32_t, std::uint32_t>> merged;
        for (auto r : rs) {
            if (!merged.empty() && r.first <= merged.back().second + 1) merged.back().second = std::max(merged.back().second, r.second);
            else merged.push_back(r);
        }
        g.ranges.insert(g.ranges.end(), merged.begin(), merged.end());
        g.offset.push_back(static_cast<std::uint32_t>(g.ranges.size()));
    }
    return g;
}

// Strongly connected component id per cell (iterative Tarjan).
inline std::vector<std::uint32_t> scc_ids(const GridDynamics& g, std::size_t* n_comp = nullptr) {
    const std::uint32_t none = UINT32_MAX;
    std::size_t n = g.count;
    std::vector<std::uint32_t> index(n, none), low(n, 0), comp(n, none);
    std::vector<char> on(n, 0);
    std::vector<std::uint32_t> stack;
    struct Frame {
        std::uint32_t v;
        std::uint32_t r; // current range
        std::uint32_t t; // next target within range
    };
    std::vector<Frame> call;
    std::uint32_t counter = 0, ncomp = 0;
    for (std::uint32_t s = 0; s < n; ++s) {
        if (index[s] != none) continue;
        auto enter = [&](std::uint32_t v) {
            index[v] = low[v] = counter++;
            stack.push_back(v);
            on[v] = 1;
            std::uint32_t r = g.offset[v];
            call.push_back({v, r, r < g.offset[v + 1] ? g.ranges[r].first : 0});
        };
        enter(s);
        while (!call.empty()) {
            Frame& fr = call.back();
            std::uint32_t v = fr.v;
            if (fr.r < g.offset[v + 1]) {
                std::uint32_t w = fr.t;
                if (fr.t >= g.ranges[fr.r].second) {
                    ++fr.r;
                    if (fr.r < g.offset[v + 1]) fr.t = g.ranges[fr.r].first;
                } else {
                    ++fr.t;
                }
                if (index[w] == none) {
                    enter(w);
                } else if (on[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::uint32_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on[w] = 0;
                    comp[w] = ncomp;
                } while (w != v);
                ++ncomp;
            }
            call.pop_back();
            if (!call.empty()) {
                std::uint32_t u = call.back().v;
                low[u] = std::min(low[u], low[v]);
            }
        }
    }
    if (n_comp) *n_comp = ncomp;
    return comp;
}

// Cells on a directed cycle: an outer estimate of the nonwandering set.
inline CellSet nonwandering_estimate(const GridDynamics& g) {
    std::size_t nc = 0;
    auto comp = scc_ids(g, &nc);
    std::vector<std::size_t> size(nc, 0);
    for (auto c : comp) ++size[c];
    CellSet s{g.eps, {}};
    for (std::size_t i = 0; i < g.count; ++i)
        if (size[comp[i]] > 1 || g.has_edge(i, i)) s.cells.push_back(i);
    return s;
}

// Cells whose closure contains x.
inline std::vector<std::size_t> cells_touching(const GridDynamics& g, double x) {
    std::size_t i = g.cell_of(x);
    std::vector<std::size_t> v{i};
    if (i > 0 && g.cell(i).lo == x) v.insert(v.begin(), i - 1);
    if (i + 1 < g.count && g.cell(i).hi == x) v.push_back(i + 1);
    return v;
}

// Cells that reach any of the given targets (targets included).
inline std::vector<char> backward_reach(const GridDynamics& g, const std::vector<std::size_t>& targets) {
    std::vector<std::vector<std::uint32_t>> rev(g.count);
    for (std::size_t i = 0; i < g.count; ++i) g.for_targets(i, [&](std::size_t t) { rev[t].push_back(static_cast<std::uint32_t>(i)); });
    std::vector<char> seen(g.count, 0);
    std::vector<std::size_t> q(targets.begin(), targets.end());
    for (auto t : targets) seen[t] = 1;
    while (!q.empty()) {
        std::size_t v = q.back();
        q.pop_back();
        for (auto u : rev[v])
            if (!seen[u]) {
                seen[u] = 1;
                q.push_back(u);
            }
    }
    return seen;
}

inline CellSet component_of_critical(const GridDynamics& g, double c, const CellSet& nonwandering) {
    auto reach = backward_reach(g, cells_touching(g, c));
    CellSet u{g.eps, {}};
    for (auto i : nonwandering.cells)
        if (reach[i]) u.cells.push_back(i);
    return u;
}

inline CellSet component_of_critical(const GridDynamics& g, double c) {
    return component_of_critical(g, c, nonwandering_estimate(g));
}

struct ComponentEstimate {
    std::vector<CellSet> U;                          // per critical point
    std::vector<std::size_t> class_of;               // per critical point; npos when U(c) is empty
    std::vector<std::vector<std::size_t>> classes;   // member critical indices
    std::vector<double> overlap;                     // pairwise overlap fractions, row-major
    std::size_t count() const { return classes.size(); }
};

inline ComponentEstimate merge_components(const std::vector<CellSet>& U) {
    const std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t n = U.size();
    ComponentEstimate ce;
    ce.U = U;
    ce.overlap.assign(n * n, 0.0);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (U[i].empty() || U[j].empty()) continue;
            std::size_t ov = intersect(U[i], U[j]).size();
            std::size_t small = std::min(U[i].size(), U[j].size());
            double frac = static_cast<double>(ov) / static_cast<double>(small);
            ce.overlap[i * n + j] = ce.overlap[j * n + i] = frac;
            if (2 * ov > small) {
                parent[find(i)] = find(j);
                continue;
            }
            std::size_t layer = 2 * 2 * (cell_runs(U[i]).size() + cell_runs(U[j]).size());
            if (ov > layer)
                fail(ErrorCode::DichotomyViolation, "components of critical points " + std::to_string(i) + " and " +
                                                        std::to_string(j) + " overlap in fraction " + PiecewiseMap::fmt(frac));
        }
    ce.class_of.assign(n, npos);
    std::vector<std::size_t> root_class(n, npos);
    for (std::size_t i = 0; i < n; ++i) {
        if (U[i].empty()) continue;
        std::size_t r = find(i);
        if (root_class[r] == npos) {
            root_class[r] = ce.classes.size();
            ce.classes.push_back({});
        }
        ce.class_of[i] = root_class[r];
        ce.classes[root_class[r]].push_back(i);
    }
    return ce;
}

inline ComponentEstimate decompose(const PiecewiseMap& f, double eps) {
    auto g = grid_graph(f, eps);
    auto nw = nonwandering_estimate(g);
    std::vector<CellSet> U;
    for (double c : f.critical()) U.push_back(component_of_critical(g, c, nw));
    return merge_components(U);
}

} // namespace ivdyn

#endif
