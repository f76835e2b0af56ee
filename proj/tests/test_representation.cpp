#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "diffstop/representation.hpp"
#include "diffstop/sticky_stopping.hpp"

using namespace diffstop;

namespace {

// mpmath reference values (tests/oracles/reference_values.py).
constexpr double kUnnormalizedAtom025 = 0.0533471664740131495;  // u(x0) nu({0}), alpha = 0.25, x0 = 1
constexpr double kCosh1 = 1.54308063481524378;

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = a + (b - a) * i / (n - 1);
    return xs;
}

double max_roundtrip_error(const FundamentalSolutions& fs, const ExcessiveCandidate& cand, const std::vector<double>& xs) {
    const auto m = martin_measure(fs, cand);
    const double u0 = cand.value(cand.normalization_point);
    double worst = 0.0;
    for (double x : xs) worst = std::max(worst, std::abs(reconstruct(m, x) - cand.value(x) / u0));
    return worst;
}

}  // namespace

TEST(MartinMeasure, GreenCandidateIsUnitPointMass) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const auto m = martin_measure(fs, green_candidate(fs, 0.7, -0.4));
    ASSERT_EQ(m.atoms().size(), 1u);
    EXPECT_EQ(m.atoms()[0].location, 0.7);
    EXPECT_NEAR(m.atoms()[0].weight, 1.0, 1e-12);
    EXPECT_EQ(m.mass_left_boundary(), 0.0);
    EXPECT_EQ(m.mass_right_boundary(), 0.0);
    EXPECT_NEAR(m.right_tail(0.5), 1.0, 1e-12);
    EXPECT_NEAR(m.right_tail(0.9), 0.0, 1e-12);
    EXPECT_NEAR(m.left_tail(-0.4), 0.0, 1e-12);
}

TEST(MartinMeasure, GreenCandidateAtStickyPoint) {
    const auto fs = fundamental(make_sticky_bm(0.0, 2.0), 0.3);
    const auto m = martin_measure(fs, green_candidate(fs, 0.0, 1.0));
    ASSERT_EQ(m.atoms().size(), 1u);
    EXPECT_EQ(m.atoms()[0].location, 0.0);
    EXPECT_NEAR(m.atoms()[0].weight, 1.0, 1e-12);
}

TEST(MartinMeasure, PsiPutsAllMassOnRightBoundary) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const auto m = martin_measure(fs, psi_candidate(fs, 0.3));
    EXPECT_TRUE(m.atoms().empty());
    EXPECT_NEAR(m.mass_right_boundary(), 1.0, 1e-12);
    EXPECT_EQ(m.mass_left_boundary(), 0.0);
    const auto r = riesz_from_martin(m);
    EXPECT_NEAR(r.harmonic_psi(), 1.0 / fs.psi(0.3), 1e-12);
    EXPECT_EQ(r.harmonic_phi(), 0.0);
    EXPECT_TRUE(r.atoms().empty());
}

TEST(MartinMeasure, PhiPutsAllMassOnLeftBoundary) {
    const auto fs = fundamental(make_sticky_bm(-0.3, 1.0), 0.2);
    const auto m = martin_measure(fs, phi_candidate(fs, -0.5));
    EXPECT_TRUE(m.atoms().empty());
    EXPECT_NEAR(m.mass_left_boundary(), 1.0, 1e-12);
    EXPECT_NEAR(riesz_from_martin(m).harmonic_phi(), 1.0 / fs.phi(-0.5), 1e-12);
}

TEST(MartinMeasure, ValueFunctionHasAtomAtStickyPoint) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.25);
    const auto m = martin_measure(fs, value_candidate(0.25, 1.0, 1.0));
    EXPECT_NEAR(m.atom_at(0.0) * m.normalization(), kUnnormalizedAtom025, 1e-14);
    EXPECT_NEAR(m.left_tail(0.0), 0.0, 1e-14);
    EXPECT_NEAR(m.left_tail(-2.0), 0.0, 1e-14);
    EXPECT_EQ(m.mass_left_boundary(), 0.0);
    EXPECT_EQ(m.mass_right_boundary(), 0.0);
}

TEST(MartinMeasure, TotalMassIsOne) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    for (const auto& cand : {green_candidate(fs, 0.7, 0.0), green_candidate(fs, -0.3, 0.2), psi_candidate(fs, 0.0),
                             phi_candidate(fs, 1.0), value_candidate(0.5, 1.0)}) {
        const auto m = martin_measure(fs, cand);
        EXPECT_NEAR(m.total_mass(), 1.0, 1e-10) << cand.name;
        // Away from a kink at x0 the two tails alone add up to one.
        EXPECT_NEAR(m.right_tail(cand.normalization_point) + m.left_tail(cand.normalization_point), 1.0, 1e-10)
            << cand.name;
    }
}

TEST(MartinMeasure, TailsAreMonotone) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.1);
    const auto cand = value_candidate(0.1, 1.0);
    const auto m = martin_measure(fs, cand);
    double prev = m.right_tail(cand.normalization_point);
    for (double x : grid(cand.normalization_point, 12.0, 200)) {
        EXPECT_LE(m.right_tail(x), prev + 1e-14);
        prev = m.right_tail(x);
    }
    prev = m.left_tail(cand.normalization_point);
    for (double x = cand.normalization_point; x > -10.0; x -= 0.05) {
        EXPECT_LE(m.left_tail(x), prev + 1e-14);
        prev = m.left_tail(x);
    }
}

TEST(MartinMeasure, NonExcessiveRewardIsRejected) {
    // g = (1+x)^+ lies strictly below V* on (-1, x*) when alpha = 0.1.
    const auto spec = make_sticky_bm(0.0, 1.0);
    const auto fs = fundamental(spec, 0.1);
    ExcessiveCandidate g;
    g.name = "reward";
    g.value = reward;
    g.derivative_dS = reward_derivative;
    g.normalization_point = 2.0;
    g.kinks = {-1.0, 0.0};
    EXPECT_THROW(martin_measure(fs, g), NotExcessive);
}

TEST(MartinMeasure, RejectsBadNormalizationPoint) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.1);
    ExcessiveCandidate g;
    g.value = reward;
    g.derivative_dS = reward_derivative;
    g.normalization_point = -2.0;  // g(x0) = 0
    EXPECT_THROW(martin_measure(fs, g), std::invalid_argument);
    const auto rk = fundamental(make_reflected_killed_bm(), 0.5);
    EXPECT_THROW(martin_measure(rk, psi_candidate(rk, 0.0)), std::invalid_argument);
}

TEST(MartinMeasure, NumericCandidateMatchesAnalytic) {
    const auto spec = make_sticky_bm(0.0, 1.0);
    const auto fs = fundamental(spec, 0.25);
    const auto exact = value_candidate(0.25, 1.0);
    const auto numeric = numeric_candidate(spec, "value-numeric", exact.value, exact.normalization_point, exact.kinks);
    const auto a = martin_measure(fs, exact);
    const auto b = martin_measure(fs, numeric);
    EXPECT_NEAR(a.atom_at(0.0), b.atom_at(0.0), 1e-7);
    EXPECT_NEAR(reconstruct(a, -1.0), reconstruct(b, -1.0), 1e-7);
}

TEST(ExcessiveCandidate, AnalyticDerivativesAgreeWithDifferenceQuotients) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const double h = 1e-6;
    for (const auto& cand : {green_candidate(fs, 0.7, 0.0), psi_candidate(fs, 0.0), value_candidate(0.1, 1.0)}) {
        for (double x : {-2.0, -0.4, 0.35, 1.3}) {
            const double sym = (cand.value(x + h) - cand.value(x - h)) / (2 * h);
            EXPECT_NEAR(cand.derivative_dS(x, Side::Left), sym, 1e-6) << cand.name << " x=" << x;
            EXPECT_NEAR(cand.derivative_dS(x, Side::Right), sym, 1e-6) << cand.name << " x=" << x;
        }
    }
}

TEST(RieszMeasure, UnitPointMassMapsToInverseGreen) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const double x0 = -0.4;
    const double y0 = 0.7;
    const auto r = riesz_from_martin(martin_measure(fs, green_candidate(fs, y0, x0)));
    ASSERT_EQ(r.atoms().size(), 1u);
    EXPECT_NEAR(r.atoms()[0].weight, 1.0 / fs.green(x0, y0), 1e-9);
    EXPECT_NEAR(r.atoms()[0].weight * r.normalization(), 1.0, 1e-12);
    EXPECT_THROW(riesz_from_martin(r), std::invalid_argument);
}

TEST(RieszMeasure, ReflectedKilledPhiHasAtomAtReflectingEnd) {
    const auto fs = fundamental(make_reflected_killed_bm(), 0.5);
    const auto r = riesz_from_martin(martin_measure(fs, phi_candidate(fs, 0.5)));
    ASSERT_EQ(r.atoms().size(), 1u);
    EXPECT_EQ(r.atoms()[0].location, 0.0);
    EXPECT_NEAR(r.atoms()[0].weight * r.normalization(), kCosh1, 1e-12);
    EXPECT_EQ(r.harmonic_phi(), 0.0);
    EXPECT_EQ(r.harmonic_psi(), 0.0);
}

TEST(RieszMeasure, ValueFunctionDensityInStoppingRegion) {
    // On the stopping region V = 1 + x, so sigma(dy) = (alpha V - V''/2) m(dy) = 2 alpha (1 + y) dy.
    const double alpha = 0.5;
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), alpha);
    const auto cand = value_candidate(alpha, 1.0);
    const double x0 = cand.normalization_point;
    const auto r = riesz_from_martin(martin_measure(fs, cand));
    const double u0 = r.normalization();
    for (double x : {1.5, 2.0, 4.0}) {
        const double expected = alpha * ((1 + x) * (1 + x) - (1 + x0) * (1 + x0));
        EXPECT_NEAR(r.right_tail(x) * u0, expected, 1e-9) << x;
    }
    // Left of x0 the same density down to 0, plus the unit atom at 0 (alpha = 1/2), and nothing below.
    EXPECT_NEAR(r.left_tail(0.5) * u0, alpha * ((1 + x0) * (1 + x0) - 2.25), 1e-9);
    EXPECT_NEAR(r.left_tail(0.0) * u0, alpha * ((1 + x0) * (1 + x0) - 1.0) + 1.0, 1e-9);
    EXPECT_NEAR(r.left_tail(-3.0) * u0, r.left_tail(0.0) * u0, 1e-9);
}

TEST(Reconstruct, PointMassAtNormalizationPoint) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const auto m = martin_measure(fs, green_candidate(fs, 0.7, 0.2));
    EXPECT_NEAR(reconstruct(m, 0.2), 1.0, 1e-12);
}

TEST(Reconstruct, ValueFunctionRatio) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const auto m = martin_measure(fs, value_candidate(0.5, 1.0, 1.0));
    EXPECT_NEAR(reconstruct(m, -1.0), std::exp(-1.0) / 2.0, 1e-12);
}

TEST(Reconstruct, GreenRoundTripOnTwentyPoints) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    EXPECT_LE(max_roundtrip_error(fs, green_candidate(fs, 0.7, 0.0), grid(-3, 3, 20)), 1e-8);
}

TEST(Reconstruct, RoundTripForStandardCandidates) {
    for (double alpha : {0.1, 0.25, 0.5, 0.6}) {
        const auto fs = fundamental(make_sticky_bm(0.0, 1.0), alpha);
        const auto xs = grid(-4, 4, 50);
        EXPECT_LE(max_roundtrip_error(fs, green_candidate(fs, 0.7, 0.0), xs), 1e-8) << alpha;
        EXPECT_LE(max_roundtrip_error(fs, green_candidate(fs, -0.3, 1.0), xs), 1e-8) << alpha;
        EXPECT_LE(max_roundtrip_error(fs, psi_candidate(fs, 0.5), xs), 1e-8) << alpha;
        EXPECT_LE(max_roundtrip_error(fs, phi_candidate(fs, -0.5), xs), 1e-8) << alpha;
        EXPECT_LE(max_roundtrip_error(fs, value_candidate(alpha, 1.0), xs), 1e-8) << alpha;
    }
}

TEST(Reconstruct, RoundTripWithDriftAndReflection) {
    const auto fsd = fundamental(make_sticky_bm(-0.4, 1.5), 0.3);
    EXPECT_LE(max_roundtrip_error(fsd, green_candidate(fsd, 0.0, 1.0), grid(-3, 3, 31)), 1e-8);
    EXPECT_LE(max_roundtrip_error(fsd, psi_candidate(fsd, -1.0), grid(-3, 3, 31)), 1e-8);
    const auto fsr = fundamental(make_reflected_killed_bm(), 0.5);
    EXPECT_LE(max_roundtrip_error(fsr, phi_candidate(fsr, 0.5), grid(0.0, 0.99, 25)), 1e-8);
    EXPECT_LE(max_roundtrip_error(fsr, psi_candidate(fsr, 0.5), grid(0.0, 0.99, 25)), 1e-8);
    EXPECT_LE(max_roundtrip_error(fsr, green_candidate(fsr, 0.3, 0.6), grid(0.0, 0.99, 25)), 1e-8);
}

TEST(Reconstruct, ContinuousAcrossAtomsUnderRefinement) {
    // Increments of the reconstructed function over shrinking steps around the
    // measure atom (0.7) and the speed atom (0) must vanish.
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.25);
    for (const auto& cand : {green_candidate(fs, 0.7, 0.0), value_candidate(0.25, 1.0)}) {
        const auto m = martin_measure(fs, cand);
        for (double z : {0.0, 0.7}) {
            double prev = INFINITY;
            for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
                const double inc = std::max(std::abs(reconstruct(m, z + h) - reconstruct(m, z)),
                                            std::abs(reconstruct(m, z) - reconstruct(m, z - h)));
                EXPECT_LT(inc, prev) << cand.name << " z=" << z << " h=" << h;
                prev = inc;
            }
            EXPECT_LT(prev, 1e-3);
        }
    }
}

TEST(DerivativeJump, GreenKernelAwayFromPoleIsSmooth) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const auto cand = green_candidate(fs, 0.7, 0.0);
    const auto r = riesz_from_martin(martin_measure(fs, cand));
    const auto jd = derivative_jump(cand, r, -0.8);
    EXPECT_NEAR(jd.jump, 0.0, 1e-12);
    EXPECT_TRUE(jd.s_differentiable);
}

TEST(DerivativeJump, GreenKernelAtPoleJumpsByOne) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    for (double y0 : {-0.3, 0.7}) {
        const auto cand = green_candidate(fs, y0, 0.2);
        const auto r = riesz_from_martin(martin_measure(fs, cand));
        const auto jd = derivative_jump(cand, r, y0);
        EXPECT_NEAR(jd.jump, 1.0, 1e-10);
        EXPECT_NEAR(jd.sigma_atom, 1.0, 1e-10);
        EXPECT_EQ(jd.speed_term, 0.0);
        EXPECT_LE(std::abs(jd.residual), 1e-9);
        EXPECT_FALSE(jd.s_differentiable);
    }
}

TEST(DerivativeJump, ValueFunctionAtStickyPoint) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.25);
    const auto cand = value_candidate(0.25, 1.0);
    const auto r = riesz_from_martin(martin_measure(fs, cand));
    const auto jd = derivative_jump(cand, r, 0.0);
    EXPECT_NEAR(jd.jump, std::sqrt(0.5) - 1.0, 1e-9);
    EXPECT_NEAR(jd.sigma_atom, std::sqrt(0.5) - 0.5, 1e-9);
    EXPECT_NEAR(jd.speed_term, 0.5, 1e-12);
    EXPECT_NEAR(jd.left_dx, std::sqrt(0.5), 1e-9);
    EXPECT_NEAR(jd.right_dx, 1.0, 1e-9);
    EXPECT_LE(std::abs(jd.residual), 1e-9);
}

TEST(DerivativeJump, RebuiltDerivativesMatchCandidate) {
    for (double alpha : {0.1, 0.25, 0.6}) {
        const auto fs = fundamental(make_sticky_bm(0.0, 1.0), alpha);
        const auto cand = value_candidate(alpha, 1.0);
        const auto r = riesz_from_martin(martin_measure(fs, cand));
        for (double z : {-2.0, -0.5, 0.0, 0.4, 1.2, 2.5, 5.0}) {
            const auto jd = derivative_jump(cand, r, z);
            EXPECT_NEAR(jd.value_from_representation, cand.value(z), 1e-9) << alpha << " " << z;
            EXPECT_NEAR(jd.left_dS, cand.derivative_dS(z, Side::Left), 1e-8) << alpha << " " << z;
            EXPECT_NEAR(jd.right_dS, cand.derivative_dS(z, Side::Right), 1e-8) << alpha << " " << z;
            EXPECT_LE(std::abs(jd.residual), 1e-9);
        }
    }
}

TEST(DerivativeJump, JumpIsNonNegativeWithoutSpeedAtom) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.3);
    for (const auto& cand : {green_candidate(fs, 0.7, 0.0), value_candidate(0.3, 1.0), psi_candidate(fs, 0.0),
                             phi_candidate(fs, 0.0)}) {
        const auto r = riesz_from_martin(martin_measure(fs, cand));
        for (double z : {-1.5, -0.25, 0.3, 0.7, 1.9}) {
            const auto jd = derivative_jump(cand, r, z);
            EXPECT_GE(jd.jump, -1e-10) << cand.name << " z=" << z;
            EXPECT_LE(std::abs(jd.residual), 1e-9) << cand.name << " z=" << z;
        }
    }
}

TEST(DerivativeJump, RejectsBoundaryPoints) {
    const auto fs = fundamental(make_reflected_killed_bm(), 0.5);
    const auto cand = phi_candidate(fs, 0.5);
    const auto m = martin_measure(fs, cand);
    EXPECT_THROW(derivative_jump(cand, m, 0.0), std::invalid_argument);
}

TEST(Excessivity, ValueFunctionPasses) {
    const auto spec = make_sticky_bm(0.0, 1.0);
    const auto cand = value_candidate(0.5, 1.0);
    const auto report = excessivity_check(spec, 0.5, cand.value, grid(-3, 3, 21), {1, 10, 100}, cand.kinks);
    EXPECT_TRUE(report.pass) << report.max_violation;
    EXPECT_LE(report.max_violation, 1e-6);
    EXPECT_EQ(report.rows.size(), 63u);
}

TEST(Excessivity, RewardFailsWhenThresholdIsPositive) {
    const auto spec = make_sticky_bm(0.0, 1.0);
    const auto report = excessivity_check(spec, 0.1, reward, grid(-3, 3, 21), {1, 10, 100}, {-1.0});
    EXPECT_FALSE(report.pass);
    EXPECT_GT(report.max_violation, 1e-3);
}

TEST(Excessivity, ConstantsPass) {
    const auto spec = make_sticky_bm(0.0, 1.0);
    for (double alpha : {0.05, 0.5, 2.0}) {
        const auto report = excessivity_check(spec, alpha, [](double) { return 1.0; }, grid(-2, 2, 9), {1, 10, 100});
        EXPECT_TRUE(report.pass) << alpha;
        // beta R_{alpha+beta} 1 = beta / (alpha + beta) exactly.
        for (const auto& row : report.rows) EXPECT_NEAR(row.resolvent, row.beta / (alpha + row.beta), 1e-9);
    }
}

TEST(Excessivity, GreenKernelIsExcessive) {
    const auto spec = make_sticky_bm(0.0, 1.0);
    const auto fs = fundamental(spec, 0.4);
    for (double y : {-1.0, 0.0, 0.8}) {
        auto u = [&fs, y](double x) { return fs.green(x, y); };
        const auto report = excessivity_check(spec, 0.4, u, grid(-2, 2, 11), {1, 10, 100}, {y});
        EXPECT_TRUE(report.pass) << "y=" << y << " violation " << report.max_violation;
    }
}

TEST(MeasureJson, AtomsRoundTripExactly) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.25);
    const auto m = martin_measure(fs, value_candidate(0.25, 1.0));
    const auto j = measure_to_json(m);
    EXPECT_EQ(j.at("kind"), "martin");
    const auto text = j.dump();
    const auto back = measure_from_json(nlohmann::json::parse(text), fs);
    ASSERT_EQ(back.atoms().size(), m.atoms().size());
    for (std::size_t i = 0; i < m.atoms().size(); ++i) {
        EXPECT_EQ(back.atoms()[i].location, m.atoms()[i].location);
        EXPECT_EQ(back.atoms()[i].weight, m.atoms()[i].weight);
    }
    EXPECT_EQ(back.x0(), m.x0());
    EXPECT_EQ(back.normalization(), m.normalization());
    // Interpolated tails reconstruct the function up to interpolation error, which shrinks with denser samples.
    const auto fine = measure_from_json(measure_to_json(m, 256), fs);
    for (double x : {-1.0, 0.5, 3.0}) {
        EXPECT_NEAR(reconstruct(back, x), reconstruct(m, x), 2e-3) << x;
        EXPECT_NEAR(reconstruct(fine, x), reconstruct(m, x), 1e-4) << x;
    }
}

TEST(MeasureJson, RieszDocumentRoundTrip) {
    const auto fs = fundamental(make_sticky_bm(0.0, 1.0), 0.5);
    const auto r = riesz_from_martin(martin_measure(fs, green_candidate(fs, 0.7, 0.0)));
    const auto j = measure_to_json(r);
    EXPECT_EQ(j.at("kind"), "riesz");
    const auto back = measure_from_json(nlohmann::json::parse(j.dump()), fs);
    EXPECT_EQ(back.kind(), MeasureKind::Riesz);
    ASSERT_EQ(back.atoms().size(), 1u);
    EXPECT_NEAR(back.atoms()[0].weight, r.atoms()[0].weight, 1e-15 * r.atoms()[0].weight);
}
