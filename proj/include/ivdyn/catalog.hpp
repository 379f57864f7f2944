#ifndef IVDYN_CATALOG_HPP
#define IVDYN_CATALOG_HPP

#include <cmath>
#include <string>
#include <vector>

#include "map.hpp"

namespace ivdyn::catalog {

// Accumulation point of the period-doubling cascade of the logistic family.
inline constexpr double kFeigenbaumLambda = 3.5699456718709449;

inline PiecewiseMap logistic(double lambda) {
    if (!(lambda > 0.0 && lambda <= 4.0)) fail(ErrorCode::InvalidMap, "logistic parameter must lie in (0,4]");
    Form f = Form::polynomial({lambda / 4.0, 0.0, -lambda}, 0.5);
    return PiecewiseMap({0.5},
                        {BranchSpec::single(0.0, 0.5, Monotonicity::Increasing, f),
                         BranchSpec::single(0.5, 1.0, Monotonicity::Decreasing, f)},
                        "logistic(" + PiecewiseMap::fmt(lambda) + ")");
}

inline PiecewiseMap tent(double slope = 2.0) {
    if (!(slope > 0.0 && slope <= 2.0)) fail(ErrorCode::InvalidMap, "tent slope must lie in (0,2]");
    return PiecewiseMap({0.5},
                        {BranchSpec::single(0.0, 0.5, Monotonicity::Increasing, Form::polynomial({0.0, slope})),
                         BranchSpec::single(0.5, 1.0, Monotonicity::Decreasing, Form::polynomial({slope, -slope}))},
                        "tent(" + PiecewiseMap::fmt(slope) + ")");
}

inline PiecewiseMap doubling() {
    return PiecewiseMap({0.5},
                        {BranchSpec::single(0.0, 0.5, Monotonicity::Increasing, Form::polynomial({0.0, 2.0})),
                         BranchSpec::single(0.5, 1.0, Monotonicity::Increasing, Form::polynomial({-1.0, 2.0}))},
                        "doubling");
}

// f(x) = x/2 split at 1/2; every orbit contracts to 0.
inline PiecewiseMap half_contraction() {
    Form f = Form::polynomial({0.0, 0.5});
    return PiecewiseMap({0.5},
                        {BranchSpec::single(0.0, 0.5, Monotonicity::Increasing, f),
                         BranchSpec::single(0.5, 1.0, Monotonicity::Increasing, f)},
                        "half");
}

// Translation d that gives x -> lambda x + d (mod 1) the rotation number rho.
inline double rotation_translation(double lambda, double rho) {
    long double sum = 0, lk = 1;
    for (long k = 1; k < 4000000; ++k) {
        lk *= lambda;
        if (lk < 1e-30L) break;
        sum += std::floor(static_cast<long double>(k) * rho) * lk;
    }
    long double l = lambda;
    return static_cast<double>(1 - l + (1 - l) * (1 - l) / l * sum);
}

// Contracted rotation: lambda x + d on (0,c), lambda x + d - 1 on (c,1), with
// c = (1-d)/lambda. The gap (f(1), f(0)) never meets the critical point.
inline PiecewiseMap lorenz_contracting(double lambda = 0.999, double rho = 0.6180339887498949) {
    double d = rotation_translation(lambda, rho);
    double c = (1.0 - d) / lambda;
    return PiecewiseMap({c},
                        {BranchSpec::single(0.0, c, Monotonicity::Increasing, Form::polynomial({1.0, lambda}, c)),
                         BranchSpec::single(c, 1.0, Monotonicity::Increasing, Form::polynomial({0.0, lambda}, c))},
                        "lorenz(" + PiecewiseMap::fmt(lambda) + ")");
}

// Cubic with [0,1/2] and [1/2,1] both invariant, each carrying a full unimodal map.
inline PiecewiseMap bimodal_invariant_halves() {
    const double a = 1.5 * std::sqrt(3.0);
    const double s = std::sqrt(1.0 / 12.0);
    Form f = Form::polynomial({0.5, a, 0.0, -4.0 * a}, 0.5);
    return PiecewiseMap({0.5 - s, 0.5 + s},
                        {BranchSpec::single(0.0, 0.5 - s, Monotonicity::Decreasing, f),
                         BranchSpec::single(0.5 - s, 0.5 + s, Monotonicity::Increasing, f),
                         BranchSpec::single(0.5 + s, 1.0, Monotonicity::Decreasing, f)},
                        "bimodal-halves");
}

// Cubic Chebyshev map on [0,1]: three full branches, one transitive cycle.
inline PiecewiseMap bimodal_transitive() {
    Form f = Form::polynomial({0.5, -3.0, 0.0, 16.0}, 0.5);
    return PiecewiseMap({0.25, 0.75},
                        {BranchSpec::single(0.0, 0.25, Monotonicity::Increasing, f),
                         BranchSpec::single(0.25, 0.75, Monotonicity::Decreasing, f),
                         BranchSpec::single(0.75, 1.0, Monotonicity::Increasing, f)},
                        "bimodal-transitive");
}

struct Entry {
    std::string key;
    PiecewiseMap map;
};

inline std::vector<Entry> standard() {
    return {{"logistic-3.2", logistic(3.2)},
            {"logistic-3.5", logistic(3.5)},
            {"logistic-3.83", logistic(3.83)},
            {"logistic-feigenbaum", logistic(kFeigenbaumLambda)},
            {"logistic-4", logistic(4.0)},
            {"tent-2", tent(2.0)},
            {"doubling", doubling()},
            {"lorenz", lorenz_contracting()},
            {"bimodal-halves", bimodal_invariant_halves()},
            {"bimodal-transitive", bimodal_transitive()}};
}

inline PiecewiseMap get(const std::string& key) {
    for (auto& e : standard())
        if (e.key == key) return e.map;
    fail(ErrorCode::PreconditionFailed, "unknown catalog map '" + key + "'");
}

} // namespace ivdyn::catalog

#endif
