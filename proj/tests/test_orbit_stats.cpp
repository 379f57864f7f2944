#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ivdyn/catalog.hpp"
#include "ivdyn/orbit_stats.hpp"

using namespace ivdyn;

namespace {

// period-2 orbit of the logistic map, closed form
std::pair<double, double> period_two(double l) {
    double r = std::sqrt((l - 3) * (l + 1));
    return {(l + 1 - r) / (2 * l), (l + 1 + r) / (2 * l)};
}

std::size_t cell(double x, double eps) {
    auto n = static_cast<std::size_t>(std::ceil(1.0 / eps));
    return std::min(static_cast<std::size_t>(std::floor(x / eps)), n - 1);
}

} // namespace

TEST(Birkhoff, PeriodTwoMeanAtLambda32) {
    auto b = birkhoff_envelope(catalog::logistic(3.2), 0.3, Observable::identity(), 1 << 20);
    EXPECT_NEAR(b.averages.back(), 4.2 / 6.4, 1e-5);
    EXPECT_FALSE(historic_from_series(b, 0.05).historic);
}

TEST(Birkhoff, ExactOnRationalDoublingOrbit) {
    // 1/7 -> 2/7 -> 4/7: mean 1/3
    auto b = birkhoff_envelope(catalog::doubling(), make_rational(1, 7), Observable::identity(), 3 * 1000);
    EXPECT_NEAR(b.averages.back(), 1.0 / 3.0, 1e-12);
}

TEST(Birkhoff, TailGapMatchesDirectComputation) {
    std::vector<double> xs;
    std::size_t len = 4;
    int v = 1;
    while (xs.size() < 300000) {
        xs.insert(xs.end(), len, static_cast<double>(v));
        v = 1 - v;
        len *= 10;
    }
    xs.resize(300000);
    auto b = birkhoff_envelope(SequenceSource(xs), Observable::identity(), xs.size());
    std::size_t n = xs.size();
    double s = 0, hi = -1, lo = 2;
    for (std::size_t m = 1; m <= n; ++m) {
        s += xs[m - 1];
        if (2 * m >= n) {
            hi = std::max(hi, s / m);
            lo = std::min(lo, s / m);
        }
    }
    // the run ends inside a long block, so the gap is decaying and the verdict is not historic
    auto h = historic_from_series(b, 0.05);
    EXPECT_NEAR(h.gap, hi - lo, 1e-12);
    EXPECT_FALSE(h.historic);
}

TEST(Birkhoff, DoublingBlocksAreHistoric) {
    // blocks of length 2^k alternate between 0 and 1; the averages keep swinging between 1/3 and 2/3
    std::vector<double> xs;
    for (int k = 0; k < 20; ++k) xs.insert(xs.end(), std::size_t{1} << k, static_cast<double>(k % 2));
    auto h = detect_historic(SequenceSource(xs), Observable::identity(), xs.size(), 0.05);
    EXPECT_TRUE(h.historic);
    EXPECT_GT(h.gap, 0.2);
}

TEST(Birkhoff, ConstantSequenceIsNotHistoric) {
    std::vector<double> xs(5000, 0.3);
    auto h = detect_historic(SequenceSource(xs), Observable::identity(), xs.size(), 0.01);
    EXPECT_FALSE(h.historic);
    EXPECT_NEAR(h.gap, 0.0, 1e-15);
}

TEST(Birkhoff, TruncationIsReported) {
    auto b = birkhoff_envelope(catalog::doubling(), 0.5, Observable::identity(), 100);
    EXPECT_TRUE(b.truncated);
    EXPECT_EQ(b.length, 1u);
}

TEST(VisitingFrequency, PeriodTwoSplitsEvenly) {
    auto [lo, hi] = period_two(3.2);
    Region V{{Span{0.0, 0.6}}};
    auto fr = visiting_frequency(catalog::logistic(3.2), 0.2, V, 100000);
    EXPECT_NEAR(fr.frequency.back(), 0.5, 1e-3);
    EXPECT_LT(lo, 0.6);
    EXPECT_GT(hi, 0.6);
}

TEST(VisitingFrequency, OpenAndClosedEndpoints) {
    std::vector<double> xs{0.5, 0.5, 0.25, 0.75};
    Region closed{{Span{0.0, 0.5, true, true}}}, open{{Span{0.0, 0.5, true, false}}};
    EXPECT_DOUBLE_EQ(visiting_frequency(SequenceSource(xs), closed, 4).frequency.back(), 0.75);
    EXPECT_DOUBLE_EQ(visiting_frequency(SequenceSource(xs), open, 4).frequency.back(), 0.25);
    EXPECT_DOUBLE_EQ(visiting_frequency(SequenceSource(xs), open.complement(), 4).frequency.back(), 0.75);
}

TEST(EmpiricalMeasure, NormalizedAndMatchesCounts) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0, 1);
    std::vector<double> xs(20000);
    for (auto& x : xs) x = U(rng);
    xs.push_back(1.0);
    double eps = 1.0 / 64;
    auto m = empirical_measure(SequenceSource(xs), xs.size(), eps);
    EXPECT_NEAR(m.total(), 1.0, 1e-12);
    std::vector<double> ref(64, 0.0);
    for (double x : xs) ref[cell(x, eps)] += 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(m.weights[i], ref[i], 1e-12);
}

TEST(EmpiricalMeasure, OrbitNormalization) {
    auto m = empirical_measure(OrbitSource(catalog::logistic(3.9), 0.123), 200000, 1.0 / 4096);
    EXPECT_NEAR(m.total(), 1.0, 1e-12);
}

TEST(OmegaEstimate, PeriodTwoCells) {
    double eps = 1.0 / 4096;
    auto [lo, hi] = period_two(3.2);
    auto om = omega_limit_estimate(catalog::logistic(3.2), 0.3, 10000, 20000, eps);
    std::vector<std::size_t> want{cell(lo, eps), cell(hi, eps)};
    EXPECT_EQ(om.cells.cells, want);
    auto st = statistical_omega_estimate(catalog::logistic(3.2), 0.3, 20000, eps);
    EXPECT_EQ(st.cells.cells, want);
}

TEST(OmegaEstimate, StatisticalDropsRareCells) {
    // a long excursion at 0.9 followed by 0.1 forever; 0.9 is in omega of the segment but rare
    std::vector<double> xs(10, 0.9);
    xs.insert(xs.end(), 10000, 0.1);
    auto st = statistical_omega_estimate(SequenceSource(xs), xs.size(), 0.25, 0.01);
    EXPECT_EQ(st.cells.cells, std::vector<std::size_t>{0});
    auto om = omega_limit_estimate(SequenceSource(xs), 0, xs.size() - 1, 0.25);
    EXPECT_EQ(om.cells.cells, (std::vector<std::size_t>{0, 3}));
}

TEST(HausdorffCells, HandExamples) {
    CellSet a{0.1, {1, 2, 7}}, b{0.1, {2, 8}};
    EXPECT_EQ(hausdorff_cells(a, b), 1u);
    CellSet c{0.1, {0}};
    EXPECT_EQ(hausdorff_cells(a, c), 7u);
    EXPECT_EQ(hausdorff_cells(a, a), 0u);
    EXPECT_EQ(hausdorff_cells(CellSet{0.1, {}}, CellSet{0.1, {}}), 0u);
}

TEST(Preconditions, Rejected) {
    auto f = catalog::tent();
    EXPECT_THROW(omega_limit_estimate(f, 0.3, 10, 5, 0.01), DynamicsError);
    EXPECT_THROW(birkhoff_envelope(f, 0.3, Observable::identity(), 0), DynamicsError);
    EXPECT_THROW(visiting_frequency(f, 0.3, Region{}, 0), DynamicsError);
}
