#pragma once

#include "tfhp/bernstein.hpp"
#include "tfhp/errors.hpp"
#include "tfhp/hawkes.hpp"
#include "tfhp/laplace_inversion.hpp"
#include "tfhp/quadrature.hpp"
#include "tfhp/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tfhp {

/// Which reading of the sum-transform lemma to evaluate. Proof: renewal-free kernel with
/// transform 1/(f + 2 gamma), gamma-weighted cumulative term, Phi_gamma(t) last. Statement:
/// renewal kernel, unweighted cumulative term, Phi_{2 gamma}(t) last.
enum class Lemma41Variant { Proof, Statement };

enum class KernelChoice {
    Sum,      // transform 1 / (f(p) + 2 gamma)
    Renewal,  // transform 1 / f(p)
};

inline constexpr double kDefaultConvolutionTol = 1e-8;
inline constexpr double kOrderStabilityRel = 1e-4;
inline constexpr double kOrderStabilityAbs = 1e-8;
inline constexpr double kVarianceNegTol = 1e-10;
// Gaver-Stehfest integrands carry ~1e-8 relative noise; asking quadrature for less is pointless
inline constexpr double kInversionQuadTol = 1e-7;

struct Model {
    HawkesParams hawkes;
    BernsteinSpec sub;
};

struct AnalyticOptions {
    Lemma41Variant variant = Lemma41Variant::Proof;
    double tol = kDefaultConvolutionTol;
    int order = kPhiInversionOrder;  // Gaver-Stehfest order on the inversion path
};

namespace detail {

struct Coefficients {
    double gamma;
    double a;      // lambda0 - kappa theta / gamma
    double b;      // kappa theta / gamma
    double c1;     // rho1 lambda0 + rho2
    double rho2;
};

inline Coefficients coefficients(const HawkesParams& p) {
    const auto d = derive(p);
    if (!(d.gamma > 0.0)) {
        throw StationarityError("analytic moments need gamma = kappa - eta mu > 0 (got " + std::to_string(d.gamma) +
                                ")");
    }
    const double b = p.kappa * p.theta / d.gamma;
    return {d.gamma, p.lambda0 - b, b, d.rho1 * p.lambda0 + d.rho2, d.rho2};
}

inline const TemperedStable& tempered(const BernsteinSpec& spec) {
    const auto* ts = spec.get_if<TemperedStable>();
    if (ts == nullptr) {
        throw DomainError("tempered stable subordinator required, got " + spec.family());
    }
    return *ts;
}

inline void check_pair(double s, double t) {
    if (!(s >= 0.0) || !(s <= t) || !std::isfinite(t)) {
        throw DomainError("bivariate transform: requires 0 <= s <= t");
    }
}

}  // namespace detail

/// Inverse tempered stable clock evaluated through the Mittag-Leffler series.
class SeriesClock {
public:
    explicit SeriesClock(const BernsteinSpec& spec) : spec_(spec), ts_(detail::tempered(spec)) {}

    double phi(double gamma, double t) const { return tfhp::phi(ts_.beta, ts_.nu, gamma, t); }

    double kernel(KernelChoice k, double gamma, double y) const {
        return k == KernelChoice::Sum ? kernel_h_sum(ts_.beta, ts_.nu, gamma, y) : kernel_h_renewal(ts_.beta, ts_.nu, y);
    }

    /// Integral of the kernel over [0, s].
    double kernel_cumulative(KernelChoice k, double gamma, double s) const {
        const double c = argument(k, gamma);
        try {
            const auto r = kernel_integral_series(ts_.beta, ts_.nu, c, s);
            if (r.error_estimate <= kPhiCancelTol) {
                return r.value;
            }
        } catch (const RangeError&) {
        } catch (const OverflowError&) {
        }
        const long double lb = ts_.beta;
        const double nu = ts_.nu;
        return gaver_stehfest([&](long double p) { return 1.0L / (p * (std::pow(p + nu, lb) - c)); }, s,
                              kPhiInversionOrder);
    }

    double mean_inverse(double s, int order) const {
        return s == 0.0 ? 0.0 : invert_mean_inverse_subordinator(spec_, s, order);
    }

    /// int_0^s kernel(y) Phi_gamma(t - y) dy with y = u^(1/beta), which leaves a bounded integrand;
    /// Phi(t - y) keeps a cusp at y = t, hence the double exponential rule.
    double convolve(KernelChoice k, double gamma, double s, double t, double tol) const {
        detail::check_pair(s, t);
        if (s == 0.0) {
            return 0.0;
        }
        const double beta = ts_.beta;
        const double nu = ts_.nu;
        const double c = argument(k, gamma);
        auto integrand = [&](double u) {
            const double y = std::min(std::pow(u, 1.0 / beta), s);
            if (y == 0.0) {
                return phi(gamma, t) / (beta * std::tgamma(beta));
            }
            return kernel_core(beta, nu, c, y) * phi(gamma, std::max(t - y, 0.0)) / beta;
        };
        // |c u| peaks at the upper end; if the series gives up there, part of the kernel comes from
        // inversion and the quadrature gets the same floor as the inversion clock
        const double top = std::pow(s, beta);
        double qtol = tol;
        try {
            const auto r = ml3_eval(beta, beta, 1.0, c * top);
            if (r.error_estimate > kKernelRelTol * std::abs(r.value)) {
                qtol = std::max(tol, kInversionQuadTol);
            }
        } catch (const NumericError&) {
            qtol = std::max(tol, kInversionQuadTol);
        }
        return integrate_endpoint(integrand, 0.0, top, qtol, "convolve_kernel_phi").value;
    }

private:
    double argument(KernelChoice k, double gamma) const {
        const double nub = std::pow(ts_.nu, ts_.beta);
        return k == KernelChoice::Sum ? nub - 2.0 * gamma : nub;
    }

    BernsteinSpec spec_;
    TemperedStable ts_;
};

/// Inverse clock of an arbitrary Bernstein function, every kernel obtained by Gaver-Stehfest.
class InversionClock {
public:
    explicit InversionClock(const BernsteinSpec& spec, int order = kPhiInversionOrder) : spec_(spec), order_(order) {}

    double phi(double gamma, double t, int order = 0) const {
        return t == 0.0 ? 1.0 : phi_by_inversion(spec_, gamma, t, pick(order));
    }

    double kernel(KernelChoice k, double gamma, double y, int order = 0) const {
        return gaver_stehfest([&](long double p) { return 1.0L / (eval_f(spec_, p) + shift(k, gamma)); }, y,
                              pick(order));
    }

    double kernel_cumulative(KernelChoice k, double gamma, double s, int order = 0) const {
        if (s == 0.0) {
            return 0.0;
        }
        return gaver_stehfest([&](long double p) { return 1.0L / (p * (eval_f(spec_, p) + shift(k, gamma))); }, s,
                              pick(order));
    }

    /// -d/dx Phi_gamma(x); transform gamma / (gamma + f).
    double phi_density(double gamma, double x, int order = 0) const {
        return gaver_stehfest([&](long double p) { return gamma / (gamma + eval_f(spec_, p)); }, x, pick(order));
    }

    double mean_inverse(double s, int order) const {
        return s == 0.0 ? 0.0 : invert_mean_inverse_subordinator(spec_, s, order);
    }

    /// int_0^s k(y) Phi(t - y) dy. On [0, s/2] the kernel's singularity at 0 is moved onto its
    /// integral by parts; [s/2, s] is integrated directly.
    double convolve(KernelChoice k, double gamma, double s, double t, double tol) const {
        detail::check_pair(s, t);
        if (s == 0.0) {
            return 0.0;
        }
        const double m = 0.5 * s;
        const double qtol = std::max(tol, kInversionQuadTol);
        auto head = [&](double y) { return y == 0.0 ? 0.0 : kernel_cumulative(k, gamma, y) * phi_density(gamma, t - y); };
        auto tail = [&](double y) {
            const double rest = t - y;
            return kernel(k, gamma, y) * (rest > 0.0 ? phi(gamma, rest) : 1.0);
        };
        const double parts = kernel_cumulative(k, gamma, m) * phi(gamma, t - m);
        const double a = integrate_endpoint(head, 0.0, m, qtol, "convolve_kernel_phi (inversion)").value;
        const double b = integrate_endpoint(tail, m, s, qtol, "convolve_kernel_phi (inversion)").value;
        return parts - a + b;
    }

    /// The working order and the reference order kDefaultStehfestOrder agree on every transform
    /// the bivariate terms touch at (s, t).
    bool stable_for(double gamma, double s, double t) const {
        const int ref = kDefaultStehfestOrder;
        auto agree = [](double work, double other) {
            return std::abs(work - other) <= kOrderStabilityRel * std::abs(work) + kOrderStabilityAbs;
        };
        const double probes[] = {t, s, 0.5 * s};
        for (double x : probes) {
            if (!(x > 0.0)) {
                continue;
            }
            if (!agree(phi(gamma, x), phi(gamma, x, ref)) || !agree(phi(2.0 * gamma, x), phi(2.0 * gamma, x, ref))) {
                return false;
            }
            for (auto k : {KernelChoice::Sum, KernelChoice::Renewal}) {
                if (!agree(kernel(k, gamma, x), kernel(k, gamma, x, ref)) ||
                    !agree(kernel_cumulative(k, gamma, x), kernel_cumulative(k, gamma, x, ref))) {
                    return false;
                }
            }
        }
        return true;
    }

private:
    int pick(int order) const { return order == 0 ? order_ : order; }

    static long double shift(KernelChoice k, double gamma) { return k == KernelChoice::Sum ? 2.0L * gamma : 0.0L; }

    BernsteinSpec spec_;
    int order_;
};

namespace detail {

template <class Clock>
double lt_sum_impl(const Clock& clock, double gamma, double s, double t, const AnalyticOptions& opt) {
    check_pair(s, t);
    const bool proof = opt.variant == Lemma41Variant::Proof;
    const double last = proof ? clock.phi(gamma, t) : clock.phi(2.0 * gamma, t);
    if (s == 0.0) {
        return last;
    }
    const double conv = clock.convolve(proof ? KernelChoice::Sum : KernelChoice::Renewal, gamma, s, t, opt.tol);
    const double cumulative = clock.kernel_cumulative(KernelChoice::Sum, gamma, s);
    return -gamma * conv + (proof ? gamma : 1.0) * cumulative - 0.5 + 0.5 * clock.phi(2.0 * gamma, s) + last;
}

template <class Clock>
double lt_diff_impl(const Clock& clock, double gamma, double s, double t, const AnalyticOptions& opt) {
    check_pair(s, t);
    if (s == 0.0) {
        return clock.phi(gamma, t);
    }
    const double conv = clock.convolve(KernelChoice::Renewal, gamma, s, t, opt.tol);
    const double cumulative = clock.kernel_cumulative(KernelChoice::Renewal, gamma, s);
    return gamma * conv - gamma * cumulative + clock.phi(gamma, t) + gamma * clock.mean_inverse(s, opt.order);
}

inline double variance_from_phi(const Coefficients& k, double phi1, double phi2) {
    const double v = k.c1 / k.gamma * (phi1 - phi2) + k.rho2 / (2.0 * k.gamma) * (phi2 - 1.0) +
                     k.a * k.a * (phi2 - phi1 * phi1);
    if (v < -kVarianceNegTol) {
        throw ConsistencyError("variance evaluated to " + std::to_string(v));
    }
    return std::max(v, 0.0);
}

}  // namespace detail

/// Combination of the two bivariate transforms into Cov(lambda(E_s), lambda(E_t)).
inline double covariance_from_transforms(const HawkesParams& p, double lt_plus, double lt_minus, double phi_s,
                                         double phi_t) {
    const auto k = detail::coefficients(p);
    const double g = -k.gamma;  // eta mu - kappa
    return k.c1 / g * (lt_plus - phi_t) + k.rho2 / (2.0 * g) * (lt_minus - lt_plus) + k.a * k.a * (lt_plus - phi_s * phi_t);
}

// ---- tempered stable clock --------------------------------------------------------------

inline double tfhp_mean(const Model& m, double t) {
    const auto k = detail::coefficients(m.hawkes);
    return k.a * SeriesClock(m.sub).phi(k.gamma, t) + k.b;
}

inline double tfhp_variance(const Model& m, double t) {
    const auto k = detail::coefficients(m.hawkes);
    const SeriesClock clock(m.sub);
    return detail::variance_from_phi(k, clock.phi(k.gamma, t), clock.phi(2.0 * k.gamma, t));
}

inline double convolve_kernel_phi(KernelChoice kernel, const BernsteinSpec& sub, double gamma, double s, double t,
                                  double tol = kDefaultConvolutionTol) {
    return SeriesClock(sub).convolve(kernel, gamma, s, t, tol);
}

/// E[exp(-gamma (E_s + E_t))].
inline double lt_sum(const BernsteinSpec& sub, double gamma, double s, double t, const AnalyticOptions& opt = {}) {
    return detail::lt_sum_impl(SeriesClock(sub), gamma, s, t, opt);
}

/// E[exp(-gamma (E_t - E_s))].
inline double lt_diff(const BernsteinSpec& sub, double gamma, double s, double t, const AnalyticOptions& opt = {}) {
    return detail::lt_diff_impl(SeriesClock(sub), gamma, s, t, opt);
}

inline double tfhp_covariance(const Model& m, double s, double t, const AnalyticOptions& opt = {}) {
    if (!(s > 0.0)) {
        throw DomainError("tfhp_covariance: requires 0 < s <= t");
    }
    const auto k = detail::coefficients(m.hawkes);
    const SeriesClock clock(m.sub);
    const double plus = detail::lt_sum_impl(clock, k.gamma, s, t, opt);
    const double minus = detail::lt_diff_impl(clock, k.gamma, s, t, opt);
    return covariance_from_transforms(m.hawkes, plus, minus, clock.phi(k.gamma, s), clock.phi(k.gamma, t));
}

/// Mean written out as the double series in t (no separate phi call).
inline double tfhp_mean_series(const Model& m, double t) {
    const auto k = detail::coefficients(m.hawkes);
    const auto& ts = detail::tempered(m.sub);
    if (t == 0.0) {
        return m.hawkes.lambda0;
    }
    const double sg = kernel_integral_series(ts.beta, ts.nu, std::pow(ts.nu, ts.beta) - k.gamma, t).value;
    return k.a * (1.0 - k.gamma * sg) + k.b;
}

/// Variance written out as the double series. printed_sign = true keeps the + sign on the
/// rho2 term exactly as typeset; false uses the sign that follows from the compositional form.
inline double tfhp_variance_series(const Model& m, double t, bool printed_sign = false) {
    const auto k = detail::coefficients(m.hawkes);
    const auto& ts = detail::tempered(m.sub);
    if (t == 0.0) {
        return 0.0;
    }
    const double nub = std::pow(ts.nu, ts.beta);
    const double s1 = kernel_integral_series(ts.beta, ts.nu, nub - k.gamma, t).value;
    const double s2 = kernel_integral_series(ts.beta, ts.nu, nub - 2.0 * k.gamma, t).value;
    const double phi1 = 1.0 - k.gamma * s1;
    const double phi2 = 1.0 - 2.0 * k.gamma * s2;
    const double sign = printed_sign ? 1.0 : -1.0;
    return k.c1 * (2.0 * s2 - s1) + sign * k.rho2 * s2 + k.a * k.a * (phi2 - phi1 * phi1);
}

// ---- general clock, all kernels by inversion -----------------------------------------------

inline double gfhp_mean(const Model& m, double t, const AnalyticOptions& opt = {}) {
    const auto k = detail::coefficients(m.hawkes);
    return k.a * InversionClock(m.sub, opt.order).phi(k.gamma, t) + k.b;
}

inline double gfhp_variance(const Model& m, double t, const AnalyticOptions& opt = {}) {
    const auto k = detail::coefficients(m.hawkes);
    const InversionClock clock(m.sub, opt.order);
    return detail::variance_from_phi(k, clock.phi(k.gamma, t), clock.phi(2.0 * k.gamma, t));
}

inline double gfhp_lt_sum(const BernsteinSpec& sub, double gamma, double s, double t, const AnalyticOptions& opt = {}) {
    return detail::lt_sum_impl(InversionClock(sub, opt.order), gamma, s, t, opt);
}

inline double gfhp_lt_diff(const BernsteinSpec& sub, double gamma, double s, double t,
                           const AnalyticOptions& opt = {}) {
    return detail::lt_diff_impl(InversionClock(sub, opt.order), gamma, s, t, opt);
}

struct BivariateTerms {
    double lt_sum = 0.0;
    double lt_diff = 0.0;
    bool ill_conditioned = false;  // caller should substitute Monte Carlo values
};

inline BivariateTerms gfhp_bivariate_terms(const Model& m, double s, double t, const AnalyticOptions& opt = {}) {
    const auto k = detail::coefficients(m.hawkes);
    const InversionClock clock(m.sub, opt.order);
    BivariateTerms out;
    if (!clock.stable_for(k.gamma, s, t)) {
        out.ill_conditioned = true;
        return out;
    }
    out.lt_sum = detail::lt_sum_impl(clock, k.gamma, s, t, opt);
    out.lt_diff = detail::lt_diff_impl(clock, k.gamma, s, t, opt);
    return out;
}

/// Covariance from the supplied bivariate terms (analytic or Monte Carlo substitutes).
inline double gfhp_covariance_from(const Model& m, double s, double t, const BivariateTerms& terms,
                                   const AnalyticOptions& opt = {}) {
    const auto k = detail::coefficients(m.hawkes);
    const InversionClock clock(m.sub, opt.order);
    return covariance_from_transforms(m.hawkes, terms.lt_sum, terms.lt_diff, clock.phi(k.gamma, s),
                                      clock.phi(k.gamma, t));
}

/// Throws ConsistencyError when the inversions are ill-conditioned at (s, t).
inline double gfhp_covariance(const Model& m, double s, double t, const AnalyticOptions& opt = {}) {
    if (!(s > 0.0)) {
        throw DomainError("gfhp_covariance: requires 0 < s <= t");
    }
    const auto terms = gfhp_bivariate_terms(m, s, t, opt);
    if (terms.ill_conditioned) {
        throw ConsistencyError("gfhp_covariance: Gaver-Stehfest orders disagree, inversion ill-conditioned");
    }
    return gfhp_covariance_from(m, s, t, terms, opt);
}

}  // namespace tfhp
