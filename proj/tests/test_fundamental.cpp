#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "diffstop/fundamental.hpp"

using namespace diffstop;

namespace {

// Reference values from tests/oracles/reference_values.py (ODE integration in mpmath).
constexpr double kPsiAt1 = 3.89348302210284669;       // alpha = 0.5, c = 1
constexpr double kGreenMinus1To1 = 0.0451117610788708973;
constexpr double kHitZeroToOne = 0.256839440244921380;
constexpr double kHitOneToZero = 0.367879441171442322;

double wronskian_at(const FundamentalSolutions& fs, double x, Side side) {
    return fs.psi_dS(x, side) * fs.phi(x) - fs.psi(x) * fs.phi_dS(x, side);
}

}  // namespace

TEST(Fundamental, StickyWronskianHasClosedForm) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(fs.wronskian(), 3.0);
    EXPECT_DOUBLE_EQ(fs.theta(), 1.0);
    EXPECT_DOUBLE_EQ(fs.gamma(), 0.5);
}

TEST(Fundamental, BothSolutionsEqualOneAtStickyPoint) {
    for (double alpha : {0.01, 0.25, 0.5, 3.0}) {
        const auto fs = fundamental(make_sticky_bm(0.0, 1.0), alpha);
        EXPECT_DOUBLE_EQ(fs.psi(0.0), 1.0);
        EXPECT_DOUBLE_EQ(fs.phi(0.0), 1.0);
    }
}

TEST(Fundamental, PsiMatchesOdeOracle) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    EXPECT_NEAR(fs.psi(1.0), kPsiAt1, 1e-14);
    // Without drift phi is the mirror image of psi.
    EXPECT_NEAR(fs.phi(-1.0), kPsiAt1, 1e-14);
}

TEST(Fundamental, GreenKernelValues) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    EXPECT_NEAR(fs.green(0.0, 0.0), 1.0 / 3.0, 1e-16);
    EXPECT_NEAR(fs.green(-1.0, 1.0), kGreenMinus1To1, 1e-16);
}

TEST(Fundamental, HittingLaplaceTransform) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    EXPECT_EQ(fs.hitting_laplace(0.4, 0.4), 1.0);
    EXPECT_NEAR(fs.hitting_laplace(0.0, 1.0), kHitZeroToOne, 1e-15);
    EXPECT_NEAR(fs.hitting_laplace(1.0, 0.0), kHitOneToZero, 1e-15);
    // Decreasing in the distance to the target.
    double prev = 1.0;
    for (int i = 1; i <= 20; ++i) {
        const double v = fs.hitting_laplace(-0.2 * i, 0.0);
        EXPECT_LT(v, prev);
        EXPECT_GT(v, 0.0);
        prev = v;
    }
}

TEST(Fundamental, WronskianIsConstantAcrossRandomPoints) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> unif(-4.0, 4.0);
    for (const auto& [mu, c, alpha] : {std::tuple{0.0, 1.0, 0.5}, std::tuple{-0.4, 2.0, 0.1}, std::tuple{0.0, 0.3, 2.0}}) {
        const auto fs = fundamental(make_sticky_bm(mu, c), alpha);
        for (int i = 0; i < 100; ++i) {
            const double x = unif(rng);
            for (Side side : {Side::Left, Side::Right})
                EXPECT_NEAR(wronskian_at(fs, x, side), fs.wronskian(), 1e-10 * fs.wronskian()) << "x=" << x;
        }
        for (Side side : {Side::Left, Side::Right})
            EXPECT_NEAR(wronskian_at(fs, 0.0, side), fs.wronskian(), 1e-10 * fs.wronskian());
    }
}

TEST(Fundamental, StickyJumpConditionsHold) {
    for (double alpha : {0.1, 0.25, 0.5, 1.7}) {
        for (double c : {0.5, 1.0, 4.0}) {
            const auto fs = fundamental(make_sticky_bm(0.0, c), alpha);
            const double psi_jump = fs.psi_dx(0.0, Side::Right) - fs.psi_dx(0.0, Side::Left);
            const double phi_jump = fs.phi_dx(0.0, Side::Right) - fs.phi_dx(0.0, Side::Left);
            EXPECT_NEAR(psi_jump, 2.0 * c * alpha * fs.psi(0.0), 1e-10);
            EXPECT_NEAR(phi_jump, 2.0 * c * alpha * fs.phi(0.0), 1e-10);
        }
    }
}

TEST(Fundamental, OneSidedDerivativesMatchFiniteDifferences) {
    const auto fs = fundamental(make_sticky_bm(-0.3, 1.0), 0.4);
    const double h = 1e-6;
    for (double x : {-2.0, -0.5, 0.7, 3.0}) {
        EXPECT_NEAR(fs.psi_dx(x, Side::Right), (fs.psi(x + h) - fs.psi(x - h)) / (2 * h), 1e-7);
        EXPECT_NEAR(fs.phi_dx(x, Side::Left), (fs.phi(x + h) - fs.phi(x - h)) / (2 * h), 1e-7);
    }
    EXPECT_NEAR(fs.psi_dx(0.0, Side::Right), (fs.psi(h) - fs.psi(0.0)) / h, 1e-5);
    EXPECT_NEAR(fs.psi_dx(0.0, Side::Left), (fs.psi(0.0) - fs.psi(-h)) / h, 1e-5);
}

TEST(Fundamental, MonotoneAndPositiveOnGrids) {
    const auto fs = fundamental(make_sticky_bm(-0.2, 1.0), 0.3);
    double psi_prev = fs.psi(-8.0);
    double phi_prev = fs.phi(-8.0);
    for (int i = 1; i <= 320; ++i) {
        const double x = -8.0 + 0.05 * i;
        EXPECT_GT(fs.psi(x), psi_prev);
        EXPECT_LT(fs.phi(x), phi_prev);
        EXPECT_GT(fs.phi(x), 0.0);
        psi_prev = fs.psi(x);
        phi_prev = fs.phi(x);
    }
}

TEST(Fundamental, GreenSymmetricAndPositiveOnRandomPairs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.25);
    for (int i = 0; i < 100; ++i) {
        const double x = unif(rng);
        const double y = unif(rng);
        EXPECT_EQ(fs.green(x, y), fs.green(y, x));
        EXPECT_GT(fs.green(x, y), 0.0);
    }
}

TEST(Fundamental, ReflectedKilledClosedForms) {
    const auto fs = fundamental(make_reflected_killed_bm(), 0.5);
    EXPECT_NEAR(fs.wronskian(), 1.54308063481524378, 1e-15);
    EXPECT_DOUBLE_EQ(fs.psi(0.0), 1.0);
    EXPECT_DOUBLE_EQ(fs.phi(1.0), 0.0);
    EXPECT_DOUBLE_EQ(fs.psi_dx(0.0, Side::Right), 0.0);
    for (double x : {0.0, 0.2, 0.6, 0.95})
        EXPECT_NEAR(wronskian_at(fs, x, Side::Right), fs.wronskian(), 1e-14);
    EXPECT_THROW(fs.green(1.0, 0.5), std::out_of_range);
    EXPECT_THROW(fs.psi(1.5), std::out_of_range);
}

TEST(Fundamental, DriftFamilyHasNoKink) {
    const auto fs = fundamental(make_drift_bm(-0.25), 0.5);
    EXPECT_DOUBLE_EQ(fs.gamma(), 0.0);
    EXPECT_DOUBLE_EQ(fs.psi_dx(0.0, Side::Left), fs.psi_dx(0.0, Side::Right));
}

TEST(Fundamental, RejectsNonPositiveAlpha) {
    EXPECT_THROW(fundamental(make_sticky_bm(0.0, 1.0), 0.0), std::invalid_argument);
    EXPECT_THROW(fundamental(make_sticky_bm(0.0, 1.0), -1.0), std::invalid_argument);
}

TEST(FundamentalZero, TransientDriftObjects) {
    const auto fs = fundamental_zero(make_drift_bm(-0.25));
    EXPECT_DOUBLE_EQ(fs.wronskian(), 1.0);
    EXPECT_DOUBLE_EQ(fs.phi(3.0), 1.0);
    // psi_0 = S - S(-inf)
    const auto spec = make_drift_bm(-0.25);
    for (double x : {-3.0, 0.0, 1.0, 2.5})
        EXPECT_NEAR(fs.psi(x), spec.scale(x) - spec.scale_at_left().value(), 1e-13);
    for (double x : {-1.0, 0.5})
        EXPECT_NEAR(wronskian_at(fs, x, Side::Right), 1.0, 1e-14);
}

TEST(FundamentalZero, RecurrentAndBoundedCasesAreRejected) {
    EXPECT_THROW(fundamental_zero(make_sticky_bm(0.0, 1.0)), std::invalid_argument);
    EXPECT_THROW(fundamental_zero(make_reflected_killed_bm()), std::invalid_argument);
}
