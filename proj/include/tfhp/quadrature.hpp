#pragma once

#include "tfhp/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <limits>
#include <string>

namespace tfhp {

/// Bisection depth cap for adaptive Gauss-Kronrod integration.
inline constexpr unsigned kMaxRefines = 30;
inline constexpr std::size_t kTanhSinhLevels = 15;

namespace detail {

inline std::string fmt_sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

}  // namespace detail

struct QuadratureResult {
    double value;
    double error_estimate;
};

/// Adaptive 15-point Gauss-Kronrod integration of f over [a, b] (b may be +inf).
///
/// Throws IntegrationError when the error estimate stays above rel_tol * |value|
/// (with an absolute floor of abs_floor) after max_refines bisection levels.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol, const char* what,
                                    unsigned max_refines = kMaxRefines, double abs_floor = 1e-15) {
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::forward<F>(f), a, b, max_refines, rel_tol, &error, &l1);
    if (!std::isfinite(value)) {
        throw IntegrationError(std::string(what) + ": integral is not finite");
    }
    const double allowed = std::max(rel_tol * std::abs(value), abs_floor);
    if (error > allowed) {
        throw IntegrationError(std::string(what) + ": tolerance not reached (error estimate " +
                               detail::fmt_sci(error) + " value " + detail::fmt_sci(value) + ")");
    }
    return {value, error};
}

/// Tanh-sinh (double exponential) rule on a finite [a, b]; tolerates endpoint cusps such as
/// (b - x)^beta that stall the Gauss-Kronrod error estimate. The integrand must be finite
/// arbitrarily close to both ends.
template <class F>
QuadratureResult integrate_endpoint(F&& f, double a, double b, double rel_tol, const char* what,
                                    double abs_floor = 1e-15) {
    thread_local boost::math::quadrature::tanh_sinh<double> rule(kTanhSinhLevels);
    double error = 0.0;
    double l1 = 0.0;
    double value = 0.0;
    double asked = rel_tol;
    // boost's stopping test is not exactly error <= tol * L1 on the original interval; tighten and retry
    for (int attempt = 0; attempt < 4; ++attempt, asked *= 0.1) {
        value = rule.integrate(f, a, b, asked, &error, &l1);
        if (!std::isfinite(value)) {
            throw IntegrationError(std::string(what) + ": integral is not finite");
        }
        if (error <= std::max(rel_tol * l1, abs_floor)) {
            return {value, error};
        }
    }
    throw IntegrationError(std::string(what) + ": tolerance not reached (error estimate " + detail::fmt_sci(error) +
                           " value " + detail::fmt_sci(value) + ")");
}

}  // namespace tfhp
