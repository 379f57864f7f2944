#ifndef IVDYN_ATTRACTOR_TYPES_HPP
#define IVDYN_ATTRACTOR_TYPES_HPP

#include <string>
#include <vector>

#include "interval.hpp"
#include "map.hpp"
#include "orbit_stats.hpp"

namespace ivdyn {

enum class AttractorKind { PeriodicLike, Cantor, CycleOfIntervals, Unresolved };

inline const char* to_string(AttractorKind k) {
    switch (k) {
    case AttractorKind::PeriodicLike: return "PeriodicLike";
    case AttractorKind::Cantor: return "Cantor";
    case AttractorKind::CycleOfIntervals: return "CycleOfIntervals";
    case AttractorKind::Unresolved: return "Unresolved";
    }
    return "?";
}

// A critical value f(c-) or f(c+).
struct CriticalValue {
    std::size_t critical_index = 0;
    Side side = Side::Minus;
    friend bool operator==(const CriticalValue&, const CriticalValue&) = default;
};

struct AttractorEstimate {
    AttractorKind kind = AttractorKind::Unresolved;
    std::vector<double> points;       // PeriodicLike: the orbit, in dynamical order
    std::vector<Interval> intervals;  // CycleOfIntervals
    CellSet cells;                    // support at resolution eps (all kinds)
    std::vector<CriticalValue> generators;
    double eps = 0.0;
    double box_slope = 0.0;           // box-count slope across refinement levels
    std::vector<std::size_t> level_counts;
    bool one_sided = false;           // PeriodicLike through a discontinuity, not a genuine periodic orbit
    std::string note;
};

} // namespace ivdyn

#endif
