#pragma once

#include "tfhp/bernstein.hpp"
#include "tfhp/errors.hpp"
#include "tfhp/rng.hpp"
#include "tfhp/stable_batch.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace tfhp {

inline constexpr std::uint64_t kDefaultMaxSteps = 2'000'000'000ULL;
inline constexpr double kMinAcceptanceRate = 1e-4;

/// One positive beta-stable draw with E[exp(-s S)] = exp(-dt s^beta).
inline double sample_stable_increment(double beta, double dt, Stream& rng) {
    if (!(beta > 0.0 && beta < 1.0) || !(dt > 0.0)) {
        throw DomainError("sample_stable_increment: needs beta in (0,1) and dt > 0");
    }
    const double x = std::numbers::pi * rng.uniform_open();
    const double w = rng.exponential();
    return std::exp(std::log(dt) / beta + std::log(std::sin(beta * x)) - std::log(std::sin(x)) / beta +
                    (1.0 - beta) / beta * (std::log(std::sin((1.0 - beta) * x)) - std::log(w)));
}

inline void check_tss_step(double beta, double nu, double dt) {
    const double rate = std::exp(-dt * std::pow(nu, beta));
    if (rate < kMinAcceptanceRate) {
        throw StepSizeError("tempered stable rejection sampler: acceptance rate " + std::to_string(rate) +
                            " below 1e-4, shrink dt");
    }
}

/// Tempered stable increment by exponential tilting: stable proposals kept with probability exp(-nu S).
inline double sample_tss_increment(double beta, double nu, double dt, Stream& rng) {
    if (nu == 0.0) {
        return sample_stable_increment(beta, dt, rng);
    }
    if (!(nu > 0.0)) {
        throw DomainError("sample_tss_increment: nu must be >= 0");
    }
    check_tss_step(beta, nu, dt);
    for (;;) {
        const double s = sample_stable_increment(beta, dt, rng);
        if (rng.uniform_open() < std::exp(-nu * s)) {
            return s;
        }
    }
}

/// Michael-Schucany-Haas draw from IG(mean, shape).
inline double sample_inverse_gaussian(double mean, double shape, Stream& rng) {
    std::normal_distribution<double> normal;
    const double n = normal(rng.engine());
    const double y = n * n;
    const double my = mean * y;
    const double x = mean + mean * my / (2.0 * shape) - mean / (2.0 * shape) * std::sqrt(4.0 * shape * my + my * my);
    if (rng.uniform_open() <= mean / (mean + x)) {
        return x;
    }
    return mean * mean / x;
}

/// Stream of i.i.d. increments D((k+1) dt) - D(k dt) for any BernsteinSpec.
///
/// Stable-type draws are produced in blocks through the vectorised kernel. A killed
/// subordinator returns +inf from the kill step on.
class IncrementSource {
public:
    IncrementSource(const BernsteinSpec& spec, double dt, Stream& rng) : spec_(spec), dt_(dt), rng_(rng) {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw DomainError("increment source: dt must be positive");
        }
        if (const auto* ts = spec.get_if<TemperedStable>()) {
            if (ts->nu > 0.0) {
                check_tss_step(ts->beta, ts->nu, dt);
            }
            log_scale_ = std::log(dt) / ts->beta;
        } else if (const auto* c = spec.get_if<CustomSubordinator>()) {
            std::vector<double> weights;
            for (const auto& atom : c->atoms) {
                weights.push_back(atom.weight);
                jump_rate_ += atom.weight;
            }
            if (!weights.empty()) {
                pick_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
                count_ = std::poisson_distribution<long>(jump_rate_ * dt);
            }
            kill_prob_ = -std::expm1(-c->kill_rate * dt);
        }
    }

    double next() {
        if (const auto* ts = spec_.get_if<TemperedStable>()) {
            return next_tempered(*ts);
        }
        if (const auto* g = spec_.get_if<GammaSubordinator>()) {
            std::gamma_distribution<double> gamma(g->shape_rate * dt_, 1.0 / g->scale_rate);
            return gamma(rng_.engine());
        }
        if (const auto* ig = spec_.get_if<InverseGaussianSubordinator>()) {
            const double level = ig->delta * dt_;
            return sample_inverse_gaussian(level / ig->g, level * level, rng_);
        }
        return next_custom(*spec_.get_if<CustomSubordinator>());
    }

private:
    static constexpr std::size_t kBlock = 512;

    double next_tempered(const TemperedStable& ts) {
        for (;;) {
            if (pos_ == kBlock) {
                refill(ts.beta);
            }
            const double s = block_[pos_++];
            if (!(s > 0.0)) {
                throw ConsistencyError("tempered stable increment is not positive");
            }
            if (ts.nu == 0.0) {
                return s;
            }
            const double a = rng_.uniform_open();
            const double x = ts.nu * s;
            // e^-x >= 1 - x settles most draws without an exp
            if (a <= 1.0 - x || a < std::exp(-x)) {
                return s;
            }
        }
    }

    void refill(double beta) {
        for (std::size_t i = 0; i < kBlock; ++i) {
            u_[i] = rng_.uniform_open();
            v_[i] = rng_.uniform_open();
        }
        stable_batch(kBlock, u_.data(), v_.data(), beta, log_scale_, block_.data());
        pos_ = 0;
    }

    double next_custom(const CustomSubordinator& c) {
        if (killed_) {
            return std::numeric_limits<double>::infinity();
        }
        if (kill_prob_ > 0.0 && rng_.uniform_open() < kill_prob_) {
            killed_ = true;
            return std::numeric_limits<double>::infinity();
        }
        double inc = c.drift * dt_;
        if (jump_rate_ > 0.0) {
            const long n = count_(rng_.engine());
            for (long i = 0; i < n; ++i) {
                inc += c.atoms[pick_(rng_.engine())].location;
            }
        }
        return inc;
    }

    const BernsteinSpec& spec_;
    double dt_;
    Stream& rng_;
    double log_scale_ = 0.0;
    std::array<double, kBlock> u_{};
    std::array<double, kBlock> v_{};
    std::array<double, kBlock> block_{};
    std::size_t pos_ = kBlock;
    double jump_rate_ = 0.0;
    double kill_prob_ = 0.0;
    bool killed_ = false;
    std::discrete_distribution<std::size_t> pick_;
    std::poisson_distribution<long> count_;
};

/// D(0) = 0, D(step), D(2 step), ...
struct SubordinatorPath {
    double step = 0.0;
    std::vector<double> values;
};

/// First-passage values E(t_j) on an external grid; bias_bound is the internal step.
struct InverseSample {
    std::vector<double> times;
    std::vector<double> values;
    double bias_bound = 0.0;
};

inline SubordinatorPath simulate_subordinator_path(const BernsteinSpec& spec, double step, std::size_t n_steps,
                                                   Stream& rng) {
    IncrementSource source(spec, step, rng);
    SubordinatorPath path{step, {}};
    path.values.reserve(n_steps + 1);
    path.values.push_back(0.0);
    double d = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
        d += source.next();
        path.values.push_back(d);
    }
    return path;
}

namespace detail {

inline void check_grid(const std::vector<double>& times, double step) {
    if (times.empty()) {
        throw DomainError("inverse sampling: empty time grid");
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (!(times[j] > 0.0) || !std::isfinite(times[j]) || (j > 0 && !(times[j] > times[j - 1]))) {
            throw DomainError("inverse sampling: times must be positive and strictly ascending");
        }
    }
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw DomainError("inverse sampling: step must be positive");
    }
}

// midpoint of the crossing cell, except that a crossing on the first step reads as 0
inline double passage_value(std::uint64_t k, double step) {
    return k == 1 ? 0.0 : (static_cast<double>(k) - 0.5) * step;
}

}  // namespace detail

/// E(t_j) read off a stored path; the path must already exceed the last time.
inline InverseSample inverse_from_path(const SubordinatorPath& path, const std::vector<double>& times) {
    detail::check_grid(times, path.step);
    InverseSample out{times, std::vector<double>(times.size()), path.step};
    std::size_t j = 0;
    for (std::size_t k = 1; k < path.values.size() && j < times.size(); ++k) {
        while (j < times.size() && path.values[k] > times[j]) {
            out.values[j++] = detail::passage_value(k, path.step);
        }
    }
    if (j < times.size()) {
        throw DomainError("inverse_from_path: path does not pass the last time");
    }
    return out;
}

/// Simulates D on the step grid until it passes the last time; E(t_j) = r* - step/2 where r* is
/// the first grid point with D(r*) > t_j.
inline InverseSample sample_inverse_on_grid(const BernsteinSpec& spec, const std::vector<double>& times, double step,
                                            Stream& rng, std::uint64_t max_steps = kDefaultMaxSteps) {
    detail::check_grid(times, step);
    InverseSample out{times, std::vector<double>(times.size()), step};
    if (const auto* c = spec.get_if<CustomSubordinator>(); c && c->atoms.empty() && c->kill_rate == 0.0) {
        // deterministic D(k step) = b k step
        for (std::size_t j = 0; j < times.size(); ++j) {
            auto k = static_cast<std::uint64_t>(std::floor(times[j] / (c->drift * step))) + 1;
            while (k > 1 && c->drift * static_cast<double>(k - 1) * step > times[j]) {
                --k;
            }
            if (k > max_steps) {
                throw ResourceError("inverse sampling: path exceeded the step limit");
            }
            out.values[j] = detail::passage_value(k, step);
        }
        return out;
    }
    IncrementSource source(spec, step, rng);
    double d = 0.0;
    std::size_t j = 0;
    for (std::uint64_t k = 1; j < times.size(); ++k) {
        if (k > max_steps) {
            throw ResourceError("inverse sampling: path exceeded the step limit");
        }
        d += source.next();
        while (j < times.size() && d > times[j]) {
            out.values[j++] = detail::passage_value(k, step);
        }
    }
    return out;
}

}  // namespace tfhp
