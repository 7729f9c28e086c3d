#pragma once

#include "tfhp/bernstein.hpp"
#include "tfhp/errors.hpp"
#include "tfhp/laplace_inversion.hpp"
#include "tfhp/quadrature.hpp"

#include <cmath>
#include <limits>

namespace tfhp {

inline constexpr double kMlZMax = 50.0;
inline constexpr int kMlMaxTerms = 2000;
inline constexpr double kMlTol = 1e-12;
inline constexpr double kPhiTol = 1e-10;
inline constexpr double kPhiMaxNuT = 30.0;
// series result is rejected when its rounding-plus-truncation estimate exceeds this
inline constexpr double kPhiCancelTol = 1e-8;
// extended-precision evaluation makes the top order usable for the fallback
inline constexpr int kPhiInversionOrder = 20;
inline constexpr double kKernelRelTol = 1e-8;  // about what Gaver-Stehfest delivers

/// Compensated (Kahan-Babuska) running sum.
class KahanSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct SeriesResult {
    double value;
    double error_estimate;  // truncation bound plus rounding accumulated over all terms
    int terms;
};

/// log|n-th term| of the Prabhakar series, computed directly from log-gamma values.
inline double ml3_log_term(double a, double b, double c, double z, int n) {
    return std::lgamma(c + n) - std::lgamma(c) + n * std::log(std::abs(z)) - std::lgamma(a * n + b) -
           std::lgamma(n + 1.0);
}

/// log|n-th term| reached through the multiplicative recurrence used by ml3_eval.
inline double ml3_recurred_log_term(double a, double b, double c, double z, int n) {
    const double log_abs_z = std::log(std::abs(z));
    double log_term = -std::lgamma(b);
    double lg_prev = std::lgamma(b);
    for (int k = 0; k < n; ++k) {
        const double lg_next = std::lgamma(a * (k + 1) + b);
        log_term += std::log(c + k) + log_abs_z - std::log(k + 1.0) - (lg_next - lg_prev);
        lg_prev = lg_next;
    }
    return log_term;
}

/// Three-parameter Mittag-Leffler function M^c_{a,b}(z) = sum (c)_n z^n / (Gamma(a n + b) n!).
///
/// Terms are advanced by a log-space recurrence and summed with compensation. Throws RangeError
/// for |z| > kMlZMax or when kMlMaxTerms is exhausted, OverflowError on a non-finite sum.
inline SeriesResult ml3_eval(double a, double b, double c, double z) {
    if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0)) {
        throw DomainError("ml3: a, b and c must be positive");
    }
    if (!std::isfinite(z) || std::abs(z) > kMlZMax) {
        throw RangeError("ml3: |z| exceeds the series range");
    }
    const double eps = std::numeric_limits<double>::epsilon();
    if (z == 0.0) {
        return {std::exp(-std::lgamma(b)), eps, 1};
    }
    const double log_abs_z = std::log(std::abs(z));
    const bool alternating = z < 0.0;

    double log_term = -std::lgamma(b);
    double lg_prev = std::lgamma(b);
    double term = std::exp(log_term);
    KahanSum sum;
    sum.add(term);
    double abs_sum = std::abs(term);
    int small_run = 0;
    for (int n = 0; n < kMlMaxTerms; ++n) {
        const double lg_next = std::lgamma(a * (n + 1) + b);
        const double next_log = log_term + std::log(c + n) + log_abs_z - std::log(n + 1.0) - (lg_next - lg_prev);
        const double log_ratio = next_log - log_term;
        const bool decreasing = log_ratio < 0.0;
        log_term = next_log;
        lg_prev = lg_next;
        term = std::exp(log_term);
        if (alternating && (n % 2 == 0)) {
            term = -term;
        }
        sum.add(term);
        abs_sum += std::abs(term);
        const double partial = sum.value();
        if (!std::isfinite(partial)) {
            throw OverflowError("ml3: series overflowed");
        }
        // relative cut; implies the absolute bound kMlTol * (1 + |partial|) and keeps tiny values
        // (large b) accurate when they are later rescaled
        if (decreasing && std::abs(term) < kMlTol * std::abs(partial) + std::numeric_limits<double>::min()) {
            if (++small_run == 2) {
                // past the peak the term ratio keeps shrinking, so the tail is geometric-bounded
                const double ratio = std::exp(log_ratio);
                const double tail = std::abs(term) * ratio / (1.0 - ratio);
                return {partial, tail + 4.0 * eps * abs_sum, n + 2};
            }
        } else {
            small_run = 0;
        }
    }
    throw RangeError("ml3: series did not converge within the term limit");
}

inline double ml3(double a, double b, double c, double z) { return ml3_eval(a, b, c, z).value; }

/// e^(-nu s) sum_m nu^m s^(beta+m) M^1_{beta,beta+m+1}(c s^beta), the integral over [0, s]
/// of the kernel e^(-nu y) y^(beta-1) M^1_{beta,beta}(c y^beta).
///
/// The outer series is cut with the geometric tail bound of ratio nu s / (m + 1) once m > nu s.
inline SeriesResult kernel_integral_series(double beta, double nu, double c, double s) {
    if (s == 0.0) {
        return {0.0, 0.0, 0};
    }
    if (!(s > 0.0)) {
        throw DomainError("kernel_integral_series: s must be >= 0");
    }
    const double eps = std::numeric_limits<double>::epsilon();
    const double arg = c * std::pow(s, beta);
    const double log_s = std::log(s);
    if (nu == 0.0) {
        const auto ml = ml3_eval(beta, beta + 1.0, 1.0, arg);
        const double scale = std::exp(beta * log_s);
        return {scale * ml.value, scale * ml.error_estimate, ml.terms};
    }
    const double nu_s = nu * s;
    const double log_nu = std::log(nu);
    KahanSum sum;
    double error = 0.0;
    int terms = 0;
    for (int m = 0; m < kMlMaxTerms; ++m) {
        const double scale = std::exp(-nu_s + m * log_nu + (beta + m) * log_s);
        const auto ml = ml3_eval(beta, beta + m + 1.0, 1.0, arg);
        const double term = scale * ml.value;
        sum.add(term);
        error += scale * ml.error_estimate + eps * std::abs(term);
        terms += ml.terms;
        if (m > nu_s) {
            const double ratio = nu_s / (m + 1.0);
            const double tail = std::abs(term) * ratio / (1.0 - ratio);
            if (tail < kPhiTol) {
                return {sum.value(), error + tail, terms};
            }
        }
    }
    throw RangeError("kernel_integral_series: outer series did not converge");
}

enum class PhiSource { Series, Inversion };

struct PhiResult {
    double value;
    PhiSource source;
};

/// Phi_gamma(t) = E[exp(-gamma E_t)] for the inverse tempered stable subordinator.
///
/// Uses the Mittag-Leffler series; when nu t > kPhiMaxNuT, when an inner series leaves its range,
/// or when cancellation in the series exceeds kPhiCancelTol, the transform f(s)/(s(gamma+f(s))) is inverted
/// numerically instead and the result is flagged.
inline PhiResult phi_eval(double beta, double nu, double gamma, double t) {
    if (!(beta > 0.0 && beta < 1.0) || !(nu >= 0.0) || !(gamma > 0.0)) {
        throw DomainError("phi: requires beta in (0,1), nu >= 0, gamma > 0");
    }
    if (!(t >= 0.0)) {
        throw DomainError("phi: t must be >= 0");
    }
    if (t == 0.0) {
        return {1.0, PhiSource::Series};
    }
    if (nu * t <= kPhiMaxNuT) {
        try {
            const auto series = kernel_integral_series(beta, nu, std::pow(nu, beta) - gamma, t);
            if (gamma * series.error_estimate <= kPhiCancelTol) {
                return {1.0 - gamma * series.value, PhiSource::Series};
            }
        } catch (const RangeError&) {
            // falls through to inversion
        }
    }
    const auto spec = BernsteinSpec::tempered_stable(beta, nu);
    return {phi_by_inversion(spec, gamma, t, kPhiInversionOrder), PhiSource::Inversion};
}

inline double phi(double beta, double nu, double gamma, double t) { return phi_eval(beta, nu, gamma, t).value; }

/// e^(-nu y) M^1_{beta,beta}(c y^beta), whose product with y^(beta-1) has Laplace transform
/// 1 / ((s + nu)^beta - c). For small beta the alternating series peaks far above its sum; once the
/// reported error passes kKernelRelTol the transform is inverted instead.
inline double kernel_core(double beta, double nu, double c, double y) {
    const double yb = std::pow(y, beta);
    try {
        const auto r = ml3_eval(beta, beta, 1.0, c * yb);
        if (r.error_estimate <= kKernelRelTol * std::abs(r.value)) {
            return std::exp(-nu * y) * r.value;
        }
    } catch (const RangeError&) {
    } catch (const OverflowError&) {
    }
    const long double lb = beta;
    const double inv = gaver_stehfest([&](long double s) { return 1.0L / (std::pow(s + nu, lb) - c); }, y,
                                      kPhiInversionOrder);
    return inv * y / yb;
}

/// Kernel e^(-nu y) y^(beta-1) M^1_{beta,beta}(-(2 gamma - nu^beta) y^beta); Laplace transform
/// 1 / (f(s) + 2 gamma) for the tempered stable f.
inline double kernel_h_sum(double beta, double nu, double gamma, double y) {
    if (!(y > 0.0)) {
        throw DomainError("kernel_h_sum: y must be positive");
    }
    return kernel_core(beta, nu, std::pow(nu, beta) - 2.0 * gamma, y) * std::pow(y, beta - 1.0);
}

/// Kernel e^(-nu y) y^(beta-1) M^1_{beta,beta}(nu^beta y^beta), the potential density with
/// Laplace transform 1 / f(s).
inline double kernel_h_renewal(double beta, double nu, double y) {
    if (!(y > 0.0)) {
        throw DomainError("kernel_h_renewal: y must be positive");
    }
    return kernel_core(beta, nu, std::pow(nu, beta), y) * std::pow(y, beta - 1.0);
}

/// Upper incomplete gamma integral int_x^inf e^(-z) z^(alpha-1) dz for alpha < 0.
inline double upper_incomplete_gamma(double alpha, double x) {
    if (!(x > 0.0)) {
        throw DomainError("upper_incomplete_gamma: x must be positive");
    }
    if (!(alpha < 0.0)) {
        throw DomainError("upper_incomplete_gamma: alpha must be negative");
    }
    // z = x (1 + w)
    auto integrand = [&](double w) { return std::exp((alpha - 1.0) * std::log1p(w) - x * w); };
    const auto r = integrate_adaptive(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-10,
                                      "upper_incomplete_gamma");
    return std::exp(alpha * std::log(x) - x) * r.value;
}

}  // namespace tfhp
