#include "tfhp/bernstein.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace tfhp;

namespace {

std::vector<BernsteinSpec> named_specs() {
    return {BernsteinSpec::tempered_stable(0.7, 0.5), BernsteinSpec::tempered_stable(0.3, 2.0),
            BernsteinSpec::stable(0.5), BernsteinSpec::gamma(1.0, 1.0), BernsteinSpec::gamma(2.5, 0.3),
            BernsteinSpec::inverse_gaussian(1.0, 2.0), BernsteinSpec::custom(0.0, 0.5, {{0.2, 1.0}, {3.0, 0.4}})};
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i) {
        g.push_back(lo * std::pow(hi / lo, i / double(n - 1)));
    }
    return g;
}

}  // namespace

TEST(EvalF, ClosedForms) {
    EXPECT_DOUBLE_EQ(eval_f(BernsteinSpec::tempered_stable(0.5, 0.0), 4.0), 2.0);
    EXPECT_NEAR(eval_f(BernsteinSpec::tempered_stable(0.5, 1.0), 1.0), std::sqrt(2.0) - 1.0, 1e-15);
    EXPECT_NEAR(eval_f(BernsteinSpec::gamma(1.0, 1.0), std::numbers::e - 1.0), 1.0, 1e-15);
    // delta (sqrt(2s + g^2) - g) at s = 4, delta = 1, g = 1: 3 - 1
    EXPECT_NEAR(eval_f(BernsteinSpec::inverse_gaussian(1.0, 1.0), 4.0), 2.0, 1e-15);
}

TEST(EvalF, StableAliasMatchesZeroTempering) {
    const auto a = BernsteinSpec::stable(0.63);
    const auto b = BernsteinSpec::tempered_stable(0.63, 0.0);
    for (double s : log_grid(1e-3, 1e3, 25)) {
        EXPECT_EQ(eval_f(a, s), eval_f(b, s));
    }
}

TEST(EvalF, CustomDriftOnlyIsLinear) {
    const auto d = BernsteinSpec::custom(0.0, 1.7, {});
    for (double s : log_grid(1e-3, 1e3, 13)) {
        EXPECT_EQ(eval_f(d, s), 1.7 * s);
    }
}

TEST(EvalF, CustomWithAtomsMatchesTripletSum) {
    const auto c = BernsteinSpec::custom(0.1, 0.5, {{0.2, 1.0}, {3.0, 0.4}});
    const double s = 1.3;
    const double expect = 0.1 + 0.5 * s + 1.0 * (1.0 - std::exp(-s * 0.2)) + 0.4 * (1.0 - std::exp(-s * 3.0));
    EXPECT_NEAR(eval_f(c, s), expect, 1e-15);
}

TEST(EvalF, NonnegativeMonotoneConcaveOnLogGrid) {
    const auto grid = log_grid(1e-3, 1e3, 61);
    for (const auto& spec : named_specs()) {
        std::vector<double> f;
        for (double s : grid) {
            f.push_back(eval_f(spec, s));
            EXPECT_GE(f.back(), 0.0) << spec.family();
        }
        for (std::size_t i = 1; i < grid.size(); ++i) {
            EXPECT_LE(f[i - 1], f[i]) << spec.family() << " at " << grid[i];
        }
        for (std::size_t i = 2; i < grid.size(); ++i) {
            const double d1 = (f[i - 1] - f[i - 2]) / (grid[i - 1] - grid[i - 2]);
            const double d2 = (f[i] - f[i - 1]) / (grid[i] - grid[i - 1]);
            EXPECT_LE(d2, d1 * (1.0 + 1e-12)) << spec.family() << " at " << grid[i];
        }
    }
}

TEST(EvalF, TemperedStableSmallArgumentSlope) {
    const auto spec = BernsteinSpec::tempered_stable(0.5, 1.0);
    const double s = 1e-6;
    EXPECT_LT(std::abs(eval_f(spec, s) / s - 0.5), 1e-4);
    EXPECT_NEAR(mean_rate(spec), 0.5, 1e-15);
}

TEST(EvalF, ExtendedAndComplexAgreeWithDouble) {
    for (const auto& spec : named_specs()) {
        for (double s : {0.01, 0.7, 12.0}) {
            const double d = eval_f(spec, s);
            EXPECT_NEAR(static_cast<double>(eval_f(spec, static_cast<long double>(s))), d, 1e-14 * (1.0 + d));
            const auto z = eval_f(spec, std::complex<double>(s, 0.0));
            EXPECT_NEAR(z.real(), d, 1e-13 * (1.0 + d));
            EXPECT_NEAR(z.imag(), 0.0, 1e-15);
        }
    }
}

TEST(EvalF, RejectsNonPositiveArgument) {
    const auto spec = BernsteinSpec::gamma(1.0, 1.0);
    EXPECT_THROW(eval_f(spec, 0.0), DomainError);
    EXPECT_THROW(eval_f(spec, -1.0), DomainError);
}

TEST(BernsteinSpec, ConstructionValidates) {
    EXPECT_THROW(BernsteinSpec::tempered_stable(1.0, 0.5), ValidationError);
    EXPECT_THROW(BernsteinSpec::tempered_stable(0.0, 0.5), ValidationError);
    EXPECT_THROW(BernsteinSpec::tempered_stable(0.5, -1.0), ValidationError);
    EXPECT_THROW(BernsteinSpec::gamma(0.0, 1.0), ValidationError);
    EXPECT_THROW(BernsteinSpec::inverse_gaussian(1.0, -2.0), ValidationError);
    EXPECT_THROW(BernsteinSpec::custom(-0.1, 1.0, {}), ValidationError);
    EXPECT_THROW(BernsteinSpec::custom(0.0, 0.0, {}), ValidationError);
    EXPECT_THROW(BernsteinSpec::custom(0.0, 1.0, {{-1.0, 1.0}}), ValidationError);
}

TEST(BernsteinSpec, KilledCustomHasPositiveValueNearZero) {
    const auto c = BernsteinSpec::custom(0.3, 1.0, {});
    EXPECT_NEAR(eval_f(c, 1e-12), 0.3, 1e-11);
    EXPECT_EQ(kill_rate(c), 0.3);
}

TEST(DriftCoefficient, Values) {
    EXPECT_EQ(drift_coefficient(BernsteinSpec::custom(0.0, 1.0, {})), 1.0);
    EXPECT_EQ(drift_coefficient(BernsteinSpec::tempered_stable(0.5, 1.0)), 0.0);
    EXPECT_EQ(drift_coefficient(BernsteinSpec::gamma(1.0, 1.0)), 0.0);
}

TEST(LevyTail, StableClosedForm) {
    // (0.5 / sqrt(pi)) * int_1^inf x^-1.5 dx
    EXPECT_NEAR(levy_tail(BernsteinSpec::stable(0.5), 1.0), 1.0 / std::sqrt(std::numbers::pi), 1e-14);
}

TEST(LevyTail, TemperedStableAgainstIncompleteGamma) {
    // beta/Gamma(1-beta) nu^beta Gamma(-beta, nu s), reference values from 30-digit arithmetic
    EXPECT_NEAR(levy_tail(BernsteinSpec::tempered_stable(0.5, 1.0), 1.0), 0.0502545416600122210, 1e-11);
    EXPECT_NEAR(levy_tail(BernsteinSpec::tempered_stable(0.7, 0.5), 0.2), 0.653624576885023880, 1e-10);
}

TEST(LevyTail, TwoResolutionQuadratureAgree) {
    // independent evaluation on the original variable, split at s + 1
    const double beta = 0.5, nu = 1.0, s = 1.0;
    auto dens = [&](double x) { return beta / std::tgamma(1.0 - beta) * std::pow(x, -beta - 1.0) * std::exp(-nu * x); };
    const double a = integrate_adaptive(dens, s, s + 1.0, 5e-12, "test").value;
    const double b = integrate_adaptive(dens, s + 1.0, std::numeric_limits<double>::infinity(), 5e-12, "test").value;
    EXPECT_NEAR(levy_tail(BernsteinSpec::tempered_stable(beta, nu), s), a + b, 1e-10);
}

TEST(LevyTail, NonincreasingAndCustom) {
    for (const auto& spec : {BernsteinSpec::tempered_stable(0.7, 0.5), BernsteinSpec::stable(0.4),
                             BernsteinSpec::custom(0.2, 0.0, {{0.5, 1.0}, {2.0, 0.25}})}) {
        double prev = HUGE_VAL;
        for (double s : log_grid(1e-2, 1e2, 21)) {
            const double v = levy_tail(spec, s);
            EXPECT_LE(v, prev);
            prev = v;
        }
    }
    const auto c = BernsteinSpec::custom(0.2, 0.0, {{0.5, 1.0}, {2.0, 0.25}});
    EXPECT_DOUBLE_EQ(levy_tail(c, 1.0), 0.45);
    EXPECT_DOUBLE_EQ(levy_tail(c, 0.1), 1.45);
}

TEST(LevyTail, UnsupportedFamily) {
    EXPECT_THROW(levy_tail(BernsteinSpec::gamma(1.0, 1.0), 1.0), NotImplementedError);
    EXPECT_THROW(levy_tail(BernsteinSpec::inverse_gaussian(1.0, 1.0), 1.0), NotImplementedError);
}
