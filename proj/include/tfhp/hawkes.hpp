#pragma once

#include "tfhp/errors.hpp"
#include "tfhp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace tfhp {

inline constexpr std::size_t kMaxEvents = 10'000'000;

struct DeterministicMark {
    double value;
};

struct ExponentialMark {
    double mean;
};

struct GammaMark {
    double shape;
    double rate;
};

using MarkLaw = std::variant<DeterministicMark, ExponentialMark, GammaMark>;

inline double mark_mean(const MarkLaw& law) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DeterministicMark>) {
                return m.value;
            } else if constexpr (std::is_same_v<T, ExponentialMark>) {
                return m.mean;
            } else {
                return m.shape / m.rate;
            }
        },
        law);
}

inline double mark_variance(const MarkLaw& law) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DeterministicMark>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ExponentialMark>) {
                return m.mean * m.mean;
            } else {
                return m.shape / (m.rate * m.rate);
            }
        },
        law);
}

struct HawkesParams {
    double theta;    // baseline
    double kappa;    // decay
    double eta;      // excitation scale
    double lambda0;  // intensity at time 0
    MarkLaw marks;

    /// Throws ValidationError; eta = 0 is allowed (Poisson limit).
    void validate() const {
        auto finite = [](double x) { return std::isfinite(x); };
        if (!(theta >= 0.0) || !finite(theta)) {
            throw ValidationError("hawkes: theta must be >= 0");
        }
        if (!(kappa > 0.0) || !finite(kappa)) {
            throw ValidationError("hawkes: kappa must be > 0");
        }
        if (!(eta >= 0.0) || !finite(eta)) {
            throw ValidationError("hawkes: eta must be >= 0");
        }
        if (!(lambda0 > 0.0) || !finite(lambda0)) {
            throw ValidationError("hawkes: lambda0 must be > 0");
        }
        const bool ok = std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, DeterministicMark>) {
                    return m.value > 0.0 && finite(m.value);
                } else if constexpr (std::is_same_v<T, ExponentialMark>) {
                    return m.mean > 0.0 && finite(m.mean);
                } else {
                    return m.shape > 0.0 && m.rate > 0.0 && finite(m.shape) && finite(m.rate);
                }
            },
            marks);
        if (!ok) {
            throw ValidationError("hawkes: mark law parameters must be positive");
        }
    }
};

struct HawkesDerived {
    double mu;      // mark mean
    double psi2;    // mark variance
    double gamma;   // kappa - eta mu
    double rho1;    // eta^2 (psi^2 + mu^2)
    double rho2;    // rho1 kappa theta / (eta mu - kappa)
    bool stationary;
};

inline HawkesDerived derive(const HawkesParams& p) {
    HawkesDerived d{};
    d.mu = mark_mean(p.marks);
    d.psi2 = mark_variance(p.marks);
    d.gamma = p.kappa - p.eta * d.mu;
    d.rho1 = p.eta * p.eta * (d.psi2 + d.mu * d.mu);
    d.rho2 = d.rho1 * p.kappa * p.theta / (p.eta * d.mu - p.kappa);
    d.stationary = d.gamma > 0.0;
    return d;
}

struct HawkesPath {
    double horizon = 0.0;
    double lambda0 = 0.0;
    std::vector<double> times;
    std::vector<double> marks;
    std::vector<double> post_intensity;  // lambda right after each event
    double terminal_intensity = 0.0;
};

inline double sample_mark(const MarkLaw& law, Stream& rng) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DeterministicMark>) {
                return m.value;
            } else if constexpr (std::is_same_v<T, ExponentialMark>) {
                return m.mean * rng.exponential();
            } else {
                std::gamma_distribution<double> g(m.shape, 1.0 / m.rate);
                return g(rng.engine());
            }
        },
        law);
}

/// Ogata thinning. Between events the intensity relaxes monotonically to theta, so
/// max(lambda(t), theta) bounds it until the next event.
inline HawkesPath simulate_hawkes(const HawkesParams& p, double horizon, Stream& rng,
                                  std::size_t max_events = kMaxEvents) {
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
        throw DomainError("simulate_hawkes: horizon must be finite and >= 0");
    }
    HawkesPath path;
    path.horizon = horizon;
    path.lambda0 = p.lambda0;
    double t = 0.0;
    double lam = p.lambda0;
    for (;;) {
        const double bound = std::max(lam, p.theta);
        const double w = rng.exponential() / bound;
        if (t + w > horizon) {
            lam = p.theta + (lam - p.theta) * std::exp(-p.kappa * (horizon - t));
            break;
        }
        t += w;
        lam = p.theta + (lam - p.theta) * std::exp(-p.kappa * w);
        if (rng.uniform_open() * bound <= lam) {
            const double xi = sample_mark(p.marks, rng);
            lam += p.eta * xi;
            if (path.times.size() == max_events) {
                throw ResourceError("simulate_hawkes: more than " + std::to_string(max_events) + " events");
            }
            path.times.push_back(t);
            path.marks.push_back(xi);
            path.post_intensity.push_back(lam);
        }
    }
    path.terminal_intensity = lam;
    return path;
}

/// theta + (lambda0 - theta) e^{-kappa t} + eta sum_{t_i <= t} xi_i e^{-kappa (t - t_i)}.
inline double intensity_at(const HawkesPath& path, const HawkesParams& p, double t) {
    if (!(t >= 0.0 && t <= path.horizon)) {
        throw DomainError("intensity_at: t outside [0, horizon]");
    }
    double excitation = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < path.times.size() && path.times[i] <= t; ++i) {
        // Neumaier
        const double x = p.eta * path.marks[i] * std::exp(-p.kappa * (t - path.times[i]));
        const double s = excitation + x;
        comp += std::abs(excitation) >= std::abs(x) ? (excitation - s) + x : (x - s) + excitation;
        excitation = s;
    }
    return p.theta + (p.lambda0 - p.theta) * std::exp(-p.kappa * t) + excitation + comp;
}

/// Same value via the one-step relation from the last event at or before t.
inline double intensity_at_recursive(const HawkesPath& path, const HawkesParams& p, double t) {
    if (!(t >= 0.0 && t <= path.horizon)) {
        throw DomainError("intensity_at: t outside [0, horizon]");
    }
    const auto it = std::upper_bound(path.times.begin(), path.times.end(), t);
    if (it == path.times.begin()) {
        return p.theta + (p.lambda0 - p.theta) * std::exp(-p.kappa * t);
    }
    const auto i = static_cast<std::size_t>(it - path.times.begin()) - 1;
    return p.theta + (path.post_intensity[i] - p.theta) * std::exp(-p.kappa * (t - path.times[i]));
}

namespace detail {

// expm1(x) / x
inline double phi1(double x) {
    if (std::abs(x) < 1e-6) {
        return 1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)));
    }
    return std::expm1(x) / x;
}

// (e^x - 1 - x) / x^2
inline double phi2(double x) {
    if (std::abs(x) < 1e-4) {
        return 0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0)));
    }
    return (std::expm1(x) - x) / (x * x);
}

}  // namespace detail

// The printed forms divide by (eta mu - kappa); writing (e^{gx} - 1)/g as x phi1(g x) gives the
// same values with the removable singularity at g = 0 taken care of.

inline double hp_mean(const HawkesParams& p, double t) {
    const double g = p.eta * mark_mean(p.marks) - p.kappa;
    return p.lambda0 * std::exp(g * t) + p.kappa * p.theta * t * detail::phi1(g * t);
}

inline double hp_variance(const HawkesParams& p, double t) {
    const auto d = derive(p);
    const double g = -d.gamma;
    const double e1 = t * detail::phi1(g * t);
    return d.rho1 * p.lambda0 * std::exp(g * t) * e1 + 0.5 * d.rho1 * p.kappa * p.theta * e1 * e1;
}

/// E[N_t], the integral of hp_mean over [0, t].
inline double hp_count_mean(const HawkesParams& p, double t) {
    const double g = p.eta * mark_mean(p.marks) - p.kappa;
    return p.lambda0 * t * detail::phi1(g * t) + p.kappa * p.theta * t * t * detail::phi2(g * t);
}

inline double hp_covariance(const HawkesParams& p, double s, double t) {
    if (!(s <= t)) {
        throw DomainError("hp_covariance: requires s <= t");
    }
    const double g = p.eta * mark_mean(p.marks) - p.kappa;
    return std::exp(g * (t - s)) * hp_variance(p, s);
}

}  // namespace tfhp
