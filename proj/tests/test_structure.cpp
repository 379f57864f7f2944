#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ivdyn/attractors.hpp"
#include "ivdyn/catalog.hpp"
#include "ivdyn/structure.hpp"

using namespace ivdyn;

TEST(LapCounts, TentDoublesEachStep) {
    auto lc = lap_counts(catalog::tent(), 20);
    for (std::size_t n = 0; n <= 20; ++n) EXPECT_EQ(lc.laps[n], std::ldexp(1.0L, static_cast<int>(n))) << n;
}

TEST(LapCounts, ChebyshevCubicTriples) {
    auto lc = lap_counts(catalog::bimodal_transitive(), 12);
    for (std::size_t n = 0; n <= 12; ++n) EXPECT_EQ(lc.laps[n], std::pow(3.0L, static_cast<long double>(n))) << n;
}

TEST(LapCounts, HalvesSplitTheDomain) {
    // each half carries a full unimodal map
    auto lc = lap_counts(catalog::bimodal_invariant_halves(), 10, {{0.0, 0.5}});
    for (std::size_t n = 0; n <= 10; ++n) EXPECT_EQ(lc.laps[n], std::ldexp(1.0L, static_cast<int>(n))) << n;
}

TEST(Entropy, FullMapsNearLog2) {
    for (auto f : {catalog::logistic(4.0), catalog::tent(2.0)}) {
        auto e = lap_entropy(f, 24);
        EXPECT_NEAR(e.h, std::numbers::ln2, 0.05) << f.name();
        EXPECT_TRUE(e.submultiplicative);
    }
    auto e = lap_entropy(catalog::bimodal_transitive(), 16);
    EXPECT_NEAR(e.h, std::log(3.0), 0.05);
}

TEST(Entropy, TentSlopeIsLogSlope) {
    // h(tent_s) = log s for 1 < s <= 2
    auto e = lap_entropy(catalog::tent(1.6), 24);
    EXPECT_NEAR(e.h, std::log(1.6), 0.02);
}

TEST(Entropy, ZeroBelowChaos) {
    for (double l : {3.2, 3.5, catalog::kFeigenbaumLambda}) {
        auto e = lap_entropy(catalog::logistic(l), 24);
        EXPECT_LE(e.h, 0.05) << l;
        EXPECT_TRUE(e.submultiplicative);
    }
    EXPECT_THROW(lap_entropy(catalog::tent(), 4), DynamicsError);
}

TEST(PeriodicOrbits, ChebyshevClosedForm) {
    // Fix(f^q) for 4x(1-x) is sin^2(k pi / (2^q -+ 1))
    auto f = catalog::logistic(4.0);
    const std::size_t Q = 8;
    auto t = periodic_orbits(f, Q);
    for (std::size_t q = 1; q <= Q; ++q) {
        EXPECT_EQ(t.fixed_point_count[q], std::size_t{1} << q) << q;
        std::vector<double> got;
        for (std::size_t d = 1; d <= q; ++d)
            if (q % d == 0)
                for (const auto& o : t.by_period[d]) got.insert(got.end(), o.points.begin(), o.points.end());
        std::vector<double> want;
        for (double m : {std::ldexp(1.0, static_cast<int>(q)) - 1, std::ldexp(1.0, static_cast<int>(q)) + 1})
            for (int k = 0; k < m; ++k) {
                double s = std::sin(std::numbers::pi * k / m);
                want.push_back(s * s);
            }
        std::sort(want.begin(), want.end());
        want.erase(std::unique(want.begin(), want.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), want.end());
        std::sort(got.begin(), got.end());
        ASSERT_EQ(got.size(), want.size()) << q;
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9) << q;
    }
}

TEST(PeriodicOrbits, TentCountsAndMeans) {
    auto t = periodic_orbits(catalog::tent(), 10, {Observable::identity()});
    for (std::size_t q = 1; q <= 10; ++q) EXPECT_EQ(t.fixed_point_count[q], std::size_t{1} << q);
    // period 2 of the tent map: {2/5, 4/5}
    ASSERT_EQ(t.by_period[2].size(), 1u);
    EXPECT_NEAR(t.by_period[2][0].means[0], 0.6, 1e-12);
    EXPECT_NEAR(t.by_period[2][0].multiplier, 4.0, 1e-12);
}

TEST(ReturnMap, DoublingDyadicBranches) {
    auto rm = first_return_map(catalog::doubling(), {0.0, 0.5}, 40);
    EXPECT_TRUE(is_full_branch(rm));
    ASSERT_GE(rm.branches.size(), 3u);
    double want[3][2] = {{0, 0.25}, {0.25, 0.375}, {0.375, 0.4375}};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(rm.branches[i].domain.lo, want[i][0], 1e-12);
        EXPECT_NEAR(rm.branches[i].domain.hi, want[i][1], 1e-12);
        EXPECT_EQ(rm.branches[i].time, static_cast<std::size_t>(i + 1));
    }
}

TEST(ReturnMap, LogisticPeriodTwoNotFull) {
    // the base avoids both points of the period-2 orbit's image half
    auto rm = first_return_map(catalog::logistic(3.2), {0.45, 0.55}, 30);
    EXPECT_FALSE(is_full_branch(rm));
    EXPECT_THROW(first_return_map(catalog::tent(), {0.6, 0.2}, 10), DynamicsError);
}

TEST(Homtervals, NoneForExpandingMaps) {
    EXPECT_TRUE(find_homtervals(catalog::doubling(), 20, 1e-4).empty());
    EXPECT_TRUE(find_homtervals(catalog::logistic(4.0), 20, 1e-4).empty());
}

TEST(Homtervals, BasinOfAttractingOrbit) {
    auto f = catalog::logistic(3.2);
    auto H = find_homtervals(f, 50, 1e-6);
    ASSERT_FALSE(H.empty());
    auto v = classify_homterval(f, H.front(), 200);
    EXPECT_EQ(v.kind, HomtervalClass::BasinOfPeriodicLike);
}

TEST(StrongTransitivity, DoublingCoverTimeClosedForm) {
    auto f = catalog::doubling();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0, 0.99);
    std::vector<Interval> probes;
    for (int i = 0; i < 20; ++i) {
        double a = U(rng);
        probes.push_back({a, a + 0.01});
    }
    auto v = strong_transitivity_check(f, {{0, 1}}, probes, 60, std::ldexp(1.0, -10));
    EXPECT_TRUE(v.strongly_transitive);
    for (const auto& p : v.probes) EXPECT_EQ(p.cover_time, static_cast<std::size_t>(std::ceil(std::log2(1.0 / 0.01)) + 1));
}

TEST(StrongTransitivity, FailsOnInvariantHalf) {
    auto v = strong_transitivity_check(catalog::bimodal_invariant_halves(), {{0, 1}}, {{0.1, 0.11}}, 60, 1e-3);
    EXPECT_FALSE(v.strongly_transitive);
    EXPECT_NEAR(v.probes[0].uncovered_length, 0.5, 1e-3);
}

TEST(BirkhoffMax, PeriodTwoClosedForm) {
    auto f = catalog::logistic(3.2);
    auto A = detect_periodic_like(f, 8).at(0);
    auto m = birkhoff_max_oracle(f, A, Observable::identity(), 12);
    EXPECT_NEAR(m.value, 0.65625, 1e-9);
}

TEST(BirkhoffMax, FullLogisticAtLeastFixedPoint) {
    auto f = catalog::logistic(4.0);
    AttractorEstimate A;
    A.kind = AttractorKind::CycleOfIntervals;
    A.intervals = {{0, 1}};
    A.eps = 1.0 / 1024;
    auto m = birkhoff_max_oracle(f, A, Observable::identity(), 12);
    EXPECT_GE(m.value, 0.75);
    EXPECT_LE(m.value, 1.0);
    for (std::size_t q = 2; q < m.trace.size(); ++q) EXPECT_GE(m.trace[q], m.trace[q - 1]);
    EXPECT_THROW(birkhoff_max_oracle(f, A, Observable::identity(), 4), DynamicsError);
}

TEST(BirkhoffMax, ConstantObservable) {
    AttractorEstimate A;
    EXPECT_DOUBLE_EQ(birkhoff_max_oracle(catalog::tent(), A, Observable::constant(0.4), 8).value, 0.4);
}
