#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ivdyn/catalog.hpp"
#include "ivdyn/decomposition.hpp"

using namespace ivdyn;

TEST(GridGraph, OverApproximatesTheMap) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0, 1);
    for (const auto& e : catalog::standard()) {
        for (double eps : {std::ldexp(1.0, -8), std::ldexp(1.0, -10)}) {
            auto g = grid_graph(e.map, eps);
            std::size_t bad = 0;
            for (int i = 0; i < 10000; ++i) {
                double x = U(rng);
                if (e.map.critical_near(x)) continue;
                if (!g.has_edge(g.cell_of(x), g.cell_of(e.map.evaluate(x)))) ++bad;
            }
            EXPECT_EQ(bad, 0u) << e.key << " eps " << eps;
        }
    }
}

TEST(GridGraph, TentEdgesByHand) {
    // cell [0, 1/4] maps onto [0, 1/2]: cells 0 and 1, plus the closed neighbour 2
    auto g = grid_graph(catalog::tent(), 0.25);
    EXPECT_TRUE(g.has_edge(0, 0));
    EXPECT_TRUE(g.has_edge(0, 1));
    EXPECT_FALSE(g.has_edge(0, 3));
    EXPECT_TRUE(g.has_edge(3, 0));
    EXPECT_FALSE(g.has_edge(3, 3));
}

TEST(Nonwandering, ContainsPeriodTwoCells) {
    double eps = 1.0 / 1024;
    auto g = grid_graph(catalog::logistic(3.2), eps);
    auto nw = nonwandering_estimate(g);
    double r = std::sqrt(4.2 * 0.2);
    for (double p : {(4.2 - r) / 6.4, (4.2 + r) / 6.4, 2.2 / 3.2}) EXPECT_TRUE(nw.contains(g.cell_of(p))) << p;
    EXPECT_LT(nw.size(), 64u);
}

TEST(Decompose, ClassCounts) {
    for (double eps : {std::ldexp(1.0, -8), std::ldexp(1.0, -10)}) {
        EXPECT_EQ(decompose(catalog::bimodal_invariant_halves(), eps).count(), 2u);
        EXPECT_EQ(decompose(catalog::logistic(4.0), eps).count(), 1u);
        EXPECT_EQ(decompose(catalog::bimodal_transitive(), eps).count(), 1u);
        for (const auto& e : catalog::standard()) EXPECT_LE(decompose(e.map, eps).count(), e.map.critical_count()) << e.key;
    }
}

TEST(Decompose, HalvesComponentsStayInTheirHalf) {
    double eps = std::ldexp(1.0, -8);
    auto f = catalog::bimodal_invariant_halves();
    auto ce = decompose(f, eps);
    ASSERT_EQ(ce.U.size(), 2u);
    for (auto c : ce.U[0].cells) EXPECT_LE(c, 128u);
    for (auto c : ce.U[1].cells) EXPECT_GE(c, 127u);
    EXPECT_NE(ce.class_of[0], ce.class_of[1]);
}

TEST(Decompose, MergeByOverlap) {
    CellSet a{0.1, {1, 2, 3}}, b{0.1, {2, 3, 4}}, c{0.1, {8}};
    auto ce = merge_components({a, b, c});
    EXPECT_EQ(ce.count(), 2u);
    EXPECT_EQ(ce.class_of[0], ce.class_of[1]);
    EXPECT_NE(ce.class_of[0], ce.class_of[2]);
}
