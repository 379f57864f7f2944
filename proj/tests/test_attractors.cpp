#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ivdyn/attractors.hpp"
#include "ivdyn/catalog.hpp"

using namespace ivdyn;

namespace {

CensusOptions quick() {
    CensusOptions o;
    o.samples = 40;
    o.horizon = 200000;
    return o;
}

// every orbit creeps up to c = 1/2 from the left and never reaches it
PiecewiseMap left_attracted() {
    return PiecewiseMap({0.5},
                        {BranchSpec::single(0.0, 0.5, Monotonicity::Increasing, Form::polynomial({0.25, 0.5})),
                         BranchSpec::single(0.5, 1.0, Monotonicity::Increasing, Form::polynomial({-0.25, 0.5}))},
                        "left-attracted");
}

std::vector<double> logistic_cycle(double l, std::size_t q) {
    double x = 0.3;
    for (int i = 0; i < 200000; ++i) x = l * x * (1 - x);
    std::vector<double> pts;
    for (std::size_t i = 0; i < q; ++i, x = l * x * (1 - x)) pts.push_back(x);
    std::sort(pts.begin(), pts.end());
    return pts;
}

} // namespace

TEST(DetectPeriodicLike, PeriodTwoAt32) {
    auto v = detect_periodic_like(catalog::logistic(3.2), 8);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, AttractorKind::PeriodicLike);
    auto pts = v[0].points;
    std::sort(pts.begin(), pts.end());
    double r = std::sqrt(4.2 * 0.2);
    EXPECT_NEAR(pts[0], (4.2 - r) / 6.4, 1e-9);
    EXPECT_NEAR(pts[1], (4.2 + r) / 6.4, 1e-9);
    EXPECT_FALSE(v[0].one_sided);
}

TEST(DetectPeriodicLike, PeriodThreeAt383) {
    auto v = detect_periodic_like(catalog::logistic(3.83), 8);
    ASSERT_EQ(v.size(), 1u);
    auto pts = v[0].points;
    std::sort(pts.begin(), pts.end());
    auto want = logistic_cycle(3.83, 3);
    ASSERT_EQ(pts.size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(pts[i], want[i], 1e-8);
}

TEST(DetectPeriodicLike, NoneForFullMaps) {
    EXPECT_TRUE(detect_periodic_like(catalog::logistic(4.0), 8).empty());
    EXPECT_TRUE(detect_periodic_like(catalog::doubling(), 8).empty());
}

TEST(DetectPeriodicLike, OneSidedThroughDiscontinuity) {
    auto f = left_attracted();
    auto v = detect_periodic_like(f, 4);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, AttractorKind::PeriodicLike);
    EXPECT_TRUE(v[0].one_sided);
    EXPECT_NEAR(v[0].points[0], 0.5, 1e-12);
}

TEST(SignedSides, AwayFromCriticalPoint) {
    auto s = signed_critical_sides(catalog::logistic(3.2), 0.3, 100000);
    EXPECT_TRUE(s.minus.empty());
    EXPECT_TRUE(s.plus.empty());
}

TEST(SignedSides, LeftApproachOnly) {
    auto s = signed_critical_sides(left_attracted(), 0.9, 1000);
    EXPECT_EQ(s.minus, std::vector<std::size_t>{0});
    EXPECT_TRUE(s.plus.empty());
}

TEST(CriticalClosure, CantorMatchesGenericOmega) {
    auto f = catalog::logistic(catalog::kFeigenbaumLambda);
    double eps = 1.0 / 4096;
    auto om = omega_limit_estimate(f, 0.3141, 100000, 200000, eps);
    auto cl = critical_orbit_closure(f, {CriticalValue{0, Side::Minus}}, 200000, eps);
    EXPECT_LE(hausdorff_cells(om.cells, cl.cells), 2u);
    EXPECT_THROW(critical_orbit_closure(f, std::vector<CriticalValue>{}, 10, eps), DynamicsError);
}

TEST(Classify, PeriodicPoints) {
    std::vector<double> pts{0.2, 0.7, 0.2, 0.7};
    auto f = PiecewiseMap({0.5},
                          {BranchSpec::single(0.0, 0.5, Monotonicity::Increasing, Form::polynomial({0.5, 1.0})),
                           BranchSpec::single(0.5, 1.0, Monotonicity::Increasing, Form::polynomial({-0.5, 1.0}))},
                          "swap");
    auto a = classify_attractor(f, pts, 1.0 / 256);
    EXPECT_EQ(a.kind, AttractorKind::PeriodicLike);
    EXPECT_EQ(a.points.size(), 2u);
}

TEST(Classify, DenseOrbitIsInterval) {
    auto o = iterate_orbit(catalog::logistic(4.0), 0.1234, 400000);
    auto a = classify_attractor(catalog::logistic(4.0), o.points, 1.0 / 1024);
    EXPECT_EQ(a.kind, AttractorKind::CycleOfIntervals);
    ASSERT_EQ(a.intervals.size(), 1u);
    EXPECT_LT(a.intervals[0].lo, 1.0 / 512);
    EXPECT_GT(a.intervals[0].hi, 1 - 1.0 / 512);
}

TEST(Classify, EmptySupportRejected) { EXPECT_THROW(classify_attractor(catalog::tent(), CellSet{0.01, {}}), DynamicsError); }

TEST(Census, Kinds) {
    struct Case {
        PiecewiseMap f;
        AttractorKind kind;
    };
    std::vector<Case> cases{{catalog::logistic(3.2), AttractorKind::PeriodicLike},
                            {catalog::logistic(3.5), AttractorKind::PeriodicLike},
                            {catalog::logistic(catalog::kFeigenbaumLambda), AttractorKind::Cantor},
                            {catalog::logistic(4.0), AttractorKind::CycleOfIntervals},
                            {catalog::tent(2.0), AttractorKind::CycleOfIntervals},
                            {catalog::doubling(), AttractorKind::CycleOfIntervals},
                            {catalog::lorenz_contracting(), AttractorKind::Cantor}};
    for (const auto& c : cases) {
        auto cs = basin_census(c.f, quick());
        ASSERT_EQ(cs.clusters.size(), 1u) << c.f.name();
        EXPECT_EQ(cs.clusters[0].attractor.kind, c.kind) << c.f.name();
        EXPECT_TRUE(cs.bound_ok) << c.f.name();
        EXPECT_NEAR(cs.clusters[0].basin_fraction, 1.0, 1e-12) << c.f.name();
    }
}

TEST(Census, PeriodFourAt35) {
    auto cs = basin_census(catalog::logistic(3.5), quick());
    ASSERT_EQ(cs.clusters.size(), 1u);
    auto pts = cs.clusters[0].attractor.points;
    std::sort(pts.begin(), pts.end());
    auto want = logistic_cycle(3.5, 4);
    ASSERT_EQ(pts.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(pts[i], want[i], 2.0 / 4096);
}

TEST(Census, BimodalHalvesHasTwoCycles) {
    auto cs = basin_census(catalog::bimodal_invariant_halves(), quick());
    ASSERT_EQ(cs.clusters.size(), 2u);
    for (const auto& c : cs.clusters) EXPECT_EQ(c.attractor.kind, AttractorKind::CycleOfIntervals);
    EXPECT_EQ(cs.bound, 2u);
}

TEST(Census, DeterministicForSeed) {
    auto a = basin_census(catalog::logistic(3.83), quick());
    auto b = basin_census(catalog::logistic(3.83), quick());
    EXPECT_EQ(a.sample_numerators, b.sample_numerators);
    ASSERT_EQ(a.clusters.size(), b.clusters.size());
    EXPECT_EQ(a.clusters[0].attractor.cells, b.clusters[0].attractor.cells);
}

TEST(Wandering, LorenzHomtervalMatchesCriticalValueClosure) {
    auto f = catalog::lorenz_contracting();
    auto H = find_homtervals(f, 2000, 1e-9);
    ASSERT_FALSE(H.empty());
    auto J = *std::max_element(H.begin(), H.end(), [](const Interval& a, const Interval& b) { return a.width() < b.width(); });
    auto v = classify_homterval(f, J, 2000);
    EXPECT_EQ(v.kind, HomtervalClass::Wandering);
    EXPECT_TRUE(v.images_disjoint);
    auto w = wandering_attractor_check(f, J, 200000, 1.0 / 4096);
    EXPECT_TRUE(w.matched);
    EXPECT_LE(w.distance, 2u);
    EXPECT_TRUE(w.meets_critical_cell);
    EXPECT_EQ(w.tried.size(), 3u);
}
