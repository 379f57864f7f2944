#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ivdyn/attractors.hpp"
#include "ivdyn/catalog.hpp"
#include "ivdyn/generic_points.hpp"
#include "ivdyn/witness_io.hpp"

using namespace ivdyn;

namespace {

AttractorEstimate full_cycle() {
    AttractorEstimate A;
    A.kind = AttractorKind::CycleOfIntervals;
    A.intervals = {{0, 1}};
    A.eps = 1.0 / 1024;
    return A;
}

// sum c_k (x - h)^k at high precision, straight from the definition
mp::Real reference(const Polynomial& p, const mp::Real& x, mpfr_prec_t prec) {
    mp::Real t(prec), acc(prec), pw(prec), term(prec);
    mpfr_sub_d(t.get(), x.get(), p.center, MPFR_RNDN);
    mpfr_set_ui(pw.get(), 1, MPFR_RNDN);
    for (double c : p.coeffs) {
        mpfr_mul_d(term.get(), pw.get(), c, MPFR_RNDN);
        mpfr_add(acc.get(), acc.get(), term.get(), MPFR_RNDN);
        mpfr_mul(pw.get(), pw.get(), t.get(), MPFR_RNDN);
    }
    return acc;
}

bool inside(const mp::Ball& b, const mp::Real& v) {
    mp::Real d(4096);
    mpfr_sub(d.get(), v.get(), b.c.get(), MPFR_RNDN);
    mpfr_abs(d.get(), d.get(), MPFR_RNDN);
    return mpfr_cmp(d.get(), b.r.get()) <= 0;
}

} // namespace

TEST(Ball, PolynomialEnclosesPointValue) {
    Polynomial p{{0.5, -3.0, 0.0, 16.0}, 0.5};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0, 1);
    for (int i = 0; i < 200; ++i) {
        mp::Real x(300);
        mpfr_set_d(x.get(), U(rng), MPFR_RNDN);
        mpfr_div_ui(x.get(), x.get(), 3, MPFR_RNDN);
        auto b = mp::eval_polynomial(p, x, 300);
        EXPECT_TRUE(inside(b, reference(p, x, 4096)));
        EXPECT_LT(b.r.to_double(), 1e-85);
    }
}

TEST(Ball, PolynomialEnclosesRange) {
    Polynomial p{{1.0, 0.0, -4.0}, 0.5};
    mp::Ball x{mp::Real(200)};
    mpfr_set_d(x.c.get(), 0.3, MPFR_RNDN);
    mpfr_set_d(x.r.get(), 1e-6, MPFR_RNDU);
    auto b = mp::eval_polynomial(p, x, 200);
    for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        mp::Real y(200);
        mpfr_set_d(y.get(), 0.3 + t * 1e-6, MPFR_RNDN);
        EXPECT_TRUE(inside(b, reference(p, y, 4096))) << t;
    }
    // |p'(0.3)| = 1.6, so the radius stays near 1.6e-6
    EXPECT_LT(b.r.to_double(), 1.7e-6);
}

TEST(BranchInverse, LogisticClosedForm) {
    auto f = catalog::logistic(4.0);
    for (double y : {0.1, 0.5, 0.9, 0.999}) {
        mp::Real Y(y, 400);
        auto x = mp::branch_inverse(f, 0, Y, 400);
        // left preimage of y under 4x(1-x): (1 - sqrt(1 - y)) / 2
        mp::Real r(400);
        mpfr_ui_sub(r.get(), 1, Y.get(), MPFR_RNDN);
        mpfr_sqrt(r.get(), r.get(), MPFR_RNDN);
        mpfr_ui_sub(r.get(), 1, r.get(), MPFR_RNDN);
        mpfr_div_2ui(r.get(), r.get(), 1, MPFR_RNDN);
        mpfr_sub(r.get(), r.get(), x.get(), MPFR_RNDN);
        EXPECT_LT(std::abs(r.to_double()), 1e-110) << y;
    }
}

TEST(BranchInverse, CubicRoundTrip) {
    auto f = catalog::bimodal_transitive();
    for (std::size_t b = 0; b < 3; ++b)
        for (double y : {0.01, 0.37, 0.8}) {
            mp::Real Y(y, 600);
            auto x = mp::branch_inverse(f, b, Y, 600);
            auto v = reference(f.branches()[b].pieces[0].form.phi, x, 1200);
            mpfr_sub(v.get(), v.get(), Y.get(), MPFR_RNDN);
            EXPECT_LT(std::abs(v.to_double()), 1e-170) << b << " " << y;
            EXPECT_EQ(f.branch_index(x.to_double()), b);
        }
}

TEST(Witness, TentHistoricPointReplays) {
    auto f = catalog::tent();
    auto phi = Observable::identity();
    auto ex = extremal_orbits(f, full_cycle(), phi, 8);
    EXPECT_NEAR(ex.hi.means[0], 2.0 / 3.0, 1e-12);
    WitnessOptions o;
    o.K = 4;
    auto w = construct_historic_point(f, full_cycle(), phi, ex.hi.points, ex.lo.points, o);
    EXPECT_EQ(w.stages.size(), 4u);
    EXPECT_GE(w.certified_gap, 0.4);
    auto rep = verify_witness(f, w, phi, w.horizon());
    EXPECT_EQ(rep.violations, 0u);
    EXPECT_GT(rep.stage_gap, 0.4);
    for (std::size_t k = 1; k < w.chain.size(); ++k) EXPECT_LT(w.chain[k].log2_width, w.chain[k - 1].log2_width);

    auto back = io::witness_from_json(io::Json::parse(io::to_json(w).dump()));
    auto rep2 = verify_witness(f, back, phi, back.horizon());
    EXPECT_EQ(rep2.midpoint_hex, rep.midpoint_hex);
    EXPECT_EQ(rep2.violations, 0u);
}

TEST(Witness, LogisticMaxAverageMatchesOracle) {
    auto f = catalog::logistic(4.0);
    auto phi = Observable::identity();
    WitnessOptions o;
    o.K = 3;
    o.single_phase = true;
    auto w = construct_max_average_point(f, full_cycle(), phi, 12, o);
    EXPECT_TRUE(w.single_phase);
    auto m = birkhoff_max_oracle(f, full_cycle(), phi, 12);
    const auto& last = w.envelope.back();
    EXPECT_LE(std::abs(last.lower - m.value), 0.02);
    EXPECT_LE(std::abs(last.upper - m.value), 0.02);
    EXPECT_EQ(verify_witness(f, w, phi, w.horizon()).violations, 0u);
}

TEST(Witness, PreconditionsRejectNonCycles) {
    auto phi = Observable::identity();
    auto f = catalog::logistic(3.2);
    auto P = detect_periodic_like(f, 8).at(0);
    AttractorEstimate C;
    C.kind = AttractorKind::Cantor;
    for (const auto& A : {P, C}) {
        try {
            construct_historic_point(f, A, phi, {}, {});
            FAIL();
        } catch (const DynamicsError& e) {
            EXPECT_EQ(e.code(), ErrorCode::PreconditionFailed);
        }
        EXPECT_THROW(extremal_orbits(f, A, phi, 8), DynamicsError);
    }
}

TEST(Witness, MalformedJsonIsParseError) {
    try {
        io::witness_from_json(io::Json::parse(R"({"map": "x"})"));
        FAIL();
    } catch (const DynamicsError& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
}
