#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ivdyn/catalog.hpp"
#include "ivdyn/map.hpp"
#include "ivdyn/orbit.hpp"

using namespace ivdyn;

TEST(Evaluate, TentQuarterGoesToHalf) { EXPECT_DOUBLE_EQ(catalog::tent().evaluate(0.25), 0.5); }

TEST(Evaluate, DoublingThreeQuarters) { EXPECT_DOUBLE_EQ(catalog::doubling().evaluate(0.75), 0.5); }

TEST(Evaluate, CriticalPointIsRejected) {
    try {
        catalog::logistic(4.0).evaluate(0.5);
        FAIL() << "expected CriticalPoint";
    } catch (const DynamicsError& e) {
        EXPECT_EQ(e.code(), ErrorCode::CriticalPoint);
    }
}

TEST(Evaluate, LogisticMatchesClosedForm) {
    auto f = catalog::logistic(3.7);
    for (double x : {0.01, 0.2, 0.4999, 0.6, 0.93}) EXPECT_NEAR(f.evaluate(x), 3.7 * x * (1 - x), 1e-15);
}

TEST(OneSidedLimit, Doubling) {
    auto f = catalog::doubling();
    EXPECT_DOUBLE_EQ(f.one_sided_limit(0, Side::Minus), 1.0);
    EXPECT_DOUBLE_EQ(f.one_sided_limit(0, Side::Plus), 0.0);
}

TEST(OneSidedLimit, LogisticContinuous) {
    auto f = catalog::logistic(4.0);
    EXPECT_DOUBLE_EQ(f.one_sided_limit(0, Side::Minus), 1.0);
    EXPECT_DOUBLE_EQ(f.one_sided_limit(0, Side::Plus), 1.0);
    EXPECT_TRUE(f.is_continuous());
    EXPECT_FALSE(catalog::doubling().is_continuous());
}

TEST(IterateOrbit, StopsAtCriticalPointWhenAsked) {
    auto o = iterate_orbit(catalog::logistic(4.0), 0.5, 10, false);
    ASSERT_EQ(o.points.size(), 1u);
    EXPECT_EQ(o.end.kind, Termination::CriticalTruncation);
    EXPECT_EQ(o.end.step, 0u);
    EXPECT_DOUBLE_EQ(o.end.critical, 0.5);
}

TEST(IterateOrbit, ContinuesThroughCriticalPoint) {
    auto o = iterate_orbit(catalog::logistic(4.0), 0.5, 4, true);
    ASSERT_EQ(o.points.size(), 5u);
    EXPECT_DOUBLE_EQ(o.points[1], 1.0);
    EXPECT_DOUBLE_EQ(o.points[2], 0.0);
    EXPECT_DOUBLE_EQ(o.points[4], 0.0);
}

TEST(IterateOrbit, DoublingThirdIsExactPeriodTwo) {
    auto o = iterate_orbit(catalog::doubling(), make_rational(1, 3), 4);
    ASSERT_EQ(o.exact_points.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(o.exact_points[i], (i % 2 ? make_rational(2, 3) : make_rational(1, 3)));
    EXPECT_EQ(o.end.kind, Termination::HorizonReached);
}

TEST(Nonflat, LogisticIsQuadratic) {
    auto r = check_nonflat(catalog::logistic(4.0));
    ASSERT_EQ(r.points.size(), 1u);
    EXPECT_TRUE(r.nonflat);
    EXPECT_EQ(r.points[0].alpha, 2.0);
    EXPECT_EQ(r.points[0].beta, 2.0);
}

TEST(Nonflat, TentIsLinear) {
    auto r = check_nonflat(catalog::tent());
    EXPECT_EQ(r.points[0].alpha, 1.0);
    EXPECT_EQ(r.points[0].beta, 1.0);
}

TEST(Construction, RejectsBranchCountMismatch) {
    EXPECT_THROW(PiecewiseMap({0.5}, {BranchSpec::single(0, 1, Monotonicity::Increasing, Form::polynomial({0, 1}))}),
                 DynamicsError);
}

TEST(Construction, RejectsBranchLeavingTheInterval) {
    try {
        PiecewiseMap({0.5},
                     {BranchSpec::single(0, 0.5, Monotonicity::Increasing, Form::polynomial({0, 3})),
                      BranchSpec::single(0.5, 1, Monotonicity::Decreasing, Form::polynomial({2, -2}))});
        FAIL() << "expected a rejection";
    } catch (const DynamicsError& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidMap);
    }
}

TEST(Localize, NoGapsIsIdentity) {
    auto f = catalog::logistic(3.9);
    auto g = localize_map(f, {0}, {0}, {});
    for (double x = 0.013; x < 1; x += 0.071) EXPECT_DOUBLE_EQ(g.evaluate(x), f.evaluate(x));
}

TEST(Localize, DoublingPlusGap) {
    auto f = catalog::doubling();
    auto g = localize_map(f, {0}, {}, {Gap{0, Side::Plus, 0.6}});
    EXPECT_DOUBLE_EQ(g.evaluate(0.3), f.evaluate(0.3));
    EXPECT_DOUBLE_EQ(g.evaluate(0.8), f.evaluate(0.8));
    EXPECT_NE(g.evaluate(0.55), f.evaluate(0.55));
    EXPECT_LT(g.one_sided_limit(0, Side::Plus), 1e-12);
    EXPECT_NEAR(g.evaluate(0.6), f.evaluate(0.6), 1e-12);
}

TEST(Localize, OrbitsAvoidingGapsAreUnchanged) {
    auto f = catalog::logistic(3.2);
    auto g = localize_map(f, {}, {0}, {Gap{0, Side::Minus, 0.48}});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0, 1);
    std::size_t full = 0;
    for (int s = 0; s < 10000; ++s) {
        double x = U(rng), y = x;
        bool avoided = true;
        for (int j = 0; j < 1000; ++j) {
            if (x > 0.48 && x < 0.5) {
                avoided = false;
                break;
            }
            double fx = f.evaluate(x), gy = g.evaluate(y);
            ASSERT_EQ(fx, gy) << "seed " << s << " step " << j;
            x = fx;
            y = gy;
        }
        full += avoided;
    }
    EXPECT_GT(full, 9000u);
}

TEST(Localize, RejectsOverlappingOrMissingGaps) {
    auto f = catalog::logistic(4.0);
    EXPECT_THROW(localize_map(f, {0}, {}, {}), DynamicsError);
    EXPECT_THROW(localize_map(f, {0}, {0}, {Gap{0, Side::Plus, 0.6}}), DynamicsError);
}

TEST(Catalog, UnknownKeyThrows) { EXPECT_THROW(catalog::get("no-such-map"), DynamicsError); }
