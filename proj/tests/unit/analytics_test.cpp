#include "tfhp/analytics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tfhp;

namespace {

HawkesParams base() { return {1.0, 2.0, 1.0, 2.0, DeterministicMark{0.5}}; }

Model acceptance_model() { return {base(), BernsteinSpec::tempered_stable(0.7, 0.5)}; }

// covariance from the conditional Hawkes moments, kept separate from the library's grouping of terms
double covariance_oracle(const HawkesParams& p, double lp, double lm, double ps, double pt) {
    const auto d = derive(p);
    const double g = -d.gamma;
    const double a = p.lambda0 - p.kappa * p.theta / d.gamma;
    return d.rho1 * p.lambda0 * (lp - pt) / g + d.rho1 * p.kappa * p.theta * (lp - 2.0 * pt + lm) / (2.0 * g * g) +
           a * a * (lp - ps * pt);
}

}  // namespace

TEST(TfhpMoments, ReferenceValues) {
    const auto m = acceptance_model();
    const double means[] = {1.5650256700182515, 1.4509516145914252, 1.3720532320506024, 1.3361451938841456};
    const double vars[] = {0.13210782375173371, 0.13088508912027575, 0.11969800186761173, 0.11179572283588634};
    const double times[] = {0.5, 1.0, 2.0, 5.0};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(tfhp_mean(m, times[i]), means[i], 1e-9) << times[i];
        EXPECT_NEAR(tfhp_variance(m, times[i]), vars[i], 2e-9) << times[i];
    }
    EXPECT_NEAR(tfhp_covariance(m, 0.5, 1.0), 0.064226338518048025, 1e-7);
}

TEST(TfhpMoments, InitialValues) {
    const auto m = acceptance_model();
    EXPECT_EQ(tfhp_mean(m, 0.0), 2.0);
    EXPECT_EQ(tfhp_variance(m, 0.0), 0.0);
}

TEST(TfhpMoments, SeriesFormsAgree) {
    const auto m = acceptance_model();
    for (double t : {0.5, 1.0, 2.0, 5.0}) {
        EXPECT_NEAR(tfhp_mean_series(m, t), tfhp_mean(m, t), 1e-10);
        EXPECT_NEAR(tfhp_variance_series(m, t), tfhp_variance(m, t), 1e-8);
    }
    // with the + sign the series goes negative at t = 2
    EXPECT_LT(tfhp_variance_series(m, 2.0, true), 0.0);
}

TEST(TfhpMoments, UntemperedReducesToFractional) {
    // phi = E_beta(-gamma t^beta)
    const Model m{base(), BernsteinSpec::stable(0.6)};
    const double g = 1.5, a = 2.0 - 4.0 / 3.0, b = 4.0 / 3.0;
    for (double t : {0.3, 1.0, 3.0}) {
        const double e1 = ml3(0.6, 1.0, 1.0, -g * std::pow(t, 0.6));
        EXPECT_NEAR(tfhp_mean(m, t), a * e1 + b, 1e-8);
        const double e2 = ml3(0.6, 1.0, 1.0, -2.0 * g * std::pow(t, 0.6));
        const auto d = derive(base());
        const double c1 = d.rho1 * 2.0 + d.rho2;
        const double v = c1 / g * (e1 - e2) + d.rho2 / (2.0 * g) * (e2 - 1.0) + a * a * (e2 - e1 * e1);
        EXPECT_NEAR(tfhp_variance(m, t), v, 1e-8);
    }
}

TEST(TfhpMoments, VarianceOracle) {
    const auto m = acceptance_model();
    const auto d = derive(base());
    const double g = -d.gamma, a = 2.0 - 4.0 / 3.0;
    for (double t : {0.5, 2.0}) {
        const double p1 = phi(0.7, 0.5, d.gamma, t), p2 = phi(0.7, 0.5, 2.0 * d.gamma, t);
        const double v = d.rho1 * 2.0 * (p2 - p1) / g + d.rho1 * 2.0 * (p2 - 2.0 * p1 + 1.0) / (2.0 * g * g) +
                         a * a * (p2 - p1 * p1);
        EXPECT_NEAR(tfhp_variance(m, t), v, 1e-12);
    }
}

TEST(TfhpMoments, StationarityRequired) {
    Model m = acceptance_model();
    m.hawkes.eta = 4.0;
    EXPECT_THROW(tfhp_mean(m, 1.0), StationarityError);
    EXPECT_THROW(tfhp_covariance(m, 0.5, 1.0), StationarityError);
    EXPECT_THROW(tfhp_mean(Model{base(), BernsteinSpec::gamma(1.0, 1.0)}, 1.0), DomainError);
}

TEST(BivariateTransforms, ReferenceValues) {
    const auto ts = BernsteinSpec::tempered_stable(0.7, 0.5);
    EXPECT_NEAR(lt_sum(ts, 1.5, 0.5, 1.0), 0.088182254062623743, 1e-8);
    EXPECT_NEAR(lt_diff(ts, 1.5, 0.5, 1.0), 0.47050640644400795, 5e-8);
    const auto st = BernsteinSpec::stable(0.5);
    EXPECT_NEAR(lt_sum(st, 1.0, 0.3, 2.0), 0.23454115800270923, 1e-8);
    EXPECT_NEAR(lt_diff(st, 1.0, 0.3, 2.0), 0.54809080301750481, 5e-8);
}

TEST(BivariateTransforms, ConvolutionReference) {
    const auto ts = BernsteinSpec::tempered_stable(0.6, 0.4);
    EXPECT_NEAR(convolve_kernel_phi(KernelChoice::Renewal, ts, 1.5, 0.7, 1.2), 0.2461015286887475, 1e-9);
    EXPECT_EQ(convolve_kernel_phi(KernelChoice::Sum, ts, 1.5, 0.0, 1.2), 0.0);
}

TEST(BivariateTransforms, DiagonalIdentities) {
    const auto ts = BernsteinSpec::tempered_stable(0.7, 0.5);
    for (double t : {0.5, 1.0, 2.0}) {
        EXPECT_NEAR(lt_sum(ts, 1.5, t, t), phi(0.7, 0.5, 3.0, t), 1e-7) << t;
        EXPECT_NEAR(lt_diff(ts, 1.5, t, t), 1.0, 1e-7) << t;
    }
    EXPECT_EQ(lt_sum(ts, 1.5, 0.0, 1.0), phi(0.7, 0.5, 1.5, 1.0));
    EXPECT_EQ(lt_diff(ts, 1.5, 0.0, 1.0), phi(0.7, 0.5, 1.5, 1.0));
    EXPECT_THROW(lt_sum(ts, 1.5, 1.0, 0.5), DomainError);
}

TEST(BivariateTransforms, Bounds) {
    // E[e^{-g(E_s+E_t)}] <= Phi(s) Phi(t)-ish ordering: Phi_2g(t) <= lt_sum <= Phi_2g(s), lt_diff in [Phi_g(t), 1]
    const auto ts = BernsteinSpec::tempered_stable(0.7, 0.5);
    const double s = 0.5, t = 2.0, g = 1.5;
    const double sum = lt_sum(ts, g, s, t);
    EXPECT_GE(sum, phi(0.7, 0.5, 2.0 * g, t));
    EXPECT_LE(sum, phi(0.7, 0.5, 2.0 * g, s));
    const double diff = lt_diff(ts, g, s, t);
    EXPECT_GE(diff, phi(0.7, 0.5, g, t));
    EXPECT_LE(diff, 1.0);
}

TEST(BivariateTransforms, StatementVariantIsNotATransform) {
    const auto ts = BernsteinSpec::tempered_stable(0.7, 0.5);
    AnalyticOptions opt;
    opt.variant = Lemma41Variant::Statement;
    const double v = lt_sum(ts, 1.5, 0.5, 1.0, opt);
    EXPECT_NEAR(v, -0.371, 1e-3);
    EXPECT_LT(v, 0.0);
}

TEST(TfhpCovariance, DiagonalIsVariance) {
    const auto m = acceptance_model();
    for (double t : {0.5, 1.0, 2.0, 5.0}) {
        EXPECT_NEAR(tfhp_covariance(m, t, t), tfhp_variance(m, t), 1e-6) << t;
    }
}

TEST(TfhpCovariance, MatchesIndependentGrouping) {
    const auto m = acceptance_model();
    const auto ts = m.sub;
    for (auto [s, t] : {std::pair{0.5, 1.0}, std::pair{1.0, 5.0}}) {
        const double oracle = covariance_oracle(base(), lt_sum(ts, 1.5, s, t), lt_diff(ts, 1.5, s, t),
                                                phi(0.7, 0.5, 1.5, s), phi(0.7, 0.5, 1.5, t));
        EXPECT_NEAR(tfhp_covariance(m, s, t), oracle, 1e-9);
    }
}

TEST(TfhpCovariance, CauchySchwarz) {
    const auto m = acceptance_model();
    for (auto [s, t] : {std::pair{0.5, 1.0}, std::pair{0.5, 5.0}, std::pair{2.0, 5.0}}) {
        const double c = tfhp_covariance(m, s, t);
        EXPECT_GT(c, 0.0);
        EXPECT_LE(c, std::sqrt(tfhp_variance(m, s) * tfhp_variance(m, t)));
    }
    EXPECT_THROW(tfhp_covariance(m, 0.0, 1.0), DomainError);
}

TEST(TfhpCovariance, MarkVarianceEntersThroughRho1) {
    Model det = acceptance_model();
    Model exp = acceptance_model();
    exp.hawkes.marks = ExponentialMark{0.5};
    // rho1 doubles; a and b are unchanged, so only the rho parts move
    EXPECT_GT(tfhp_variance(exp, 1.0), tfhp_variance(det, 1.0));
    EXPECT_EQ(tfhp_mean(exp, 1.0), tfhp_mean(det, 1.0));
}

TEST(GfhpMoments, AgreeWithSeriesForTemperedStable) {
    const auto m = acceptance_model();
    for (double t : {0.5, 1.0, 2.0, 5.0}) {
        EXPECT_NEAR(gfhp_mean(m, t), tfhp_mean(m, t), 1e-5) << t;
        EXPECT_NEAR(gfhp_variance(m, t), tfhp_variance(m, t), 1e-5) << t;
    }
    EXPECT_NEAR(gfhp_covariance(m, 0.5, 1.0), tfhp_covariance(m, 0.5, 1.0), 1e-5);
    const auto ts = m.sub;
    EXPECT_NEAR(gfhp_lt_sum(ts, 1.5, 0.5, 1.0), lt_sum(ts, 1.5, 0.5, 1.0), 1e-5);
    EXPECT_NEAR(gfhp_lt_diff(ts, 1.5, 0.5, 1.0), lt_diff(ts, 1.5, 0.5, 1.0), 1e-5);
}

TEST(GfhpMoments, PureDriftIsClassicalHawkes) {
    const Model m{base(), BernsteinSpec::custom(0.0, 1.0, {})};
    for (double t : {0.5, 1.0, 2.0}) {
        EXPECT_NEAR(gfhp_mean(m, t), hp_mean(base(), t), 1e-6) << t;
        EXPECT_NEAR(gfhp_variance(m, t), hp_variance(base(), t), 1e-6) << t;
    }
}

TEST(GfhpMoments, GammaClockIsWellFormed) {
    const Model m{base(), BernsteinSpec::gamma(1.0, 1.0)};
    double prev = gfhp_mean(m, 0.25);
    for (double t : {0.5, 1.0, 2.0}) {
        const double mean = gfhp_mean(m, t);
        EXPECT_LT(mean, prev);
        EXPECT_GT(mean, 4.0 / 3.0);
        EXPECT_GT(gfhp_variance(m, t), 0.0);
        prev = mean;
    }
    const auto terms = gfhp_bivariate_terms(m, 0.5, 1.0);
    if (!terms.ill_conditioned) {
        EXPECT_GT(terms.lt_sum, 0.0);
        EXPECT_LT(terms.lt_sum, 1.0);
        EXPECT_GT(terms.lt_diff, 0.0);
        EXPECT_LE(terms.lt_diff, 1.0 + 1e-6);
    }
}
