#pragma once

#include "tfhp/bernstein.hpp"
#include "tfhp/errors.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <type_traits>

namespace tfhp {

inline constexpr int kDefaultStehfestOrder = 16;
inline constexpr int kMinStehfestOrder = 8;
inline constexpr int kMaxStehfestOrder = 20;

namespace detail {

using StehfestRow = std::array<long double, kMaxStehfestOrder + 1>;

constexpr long double factorial_ld(int n) {
    long double r = 1.0L;
    for (int i = 2; i <= n; ++i) {
        r *= static_cast<long double>(i);
    }
    return r;
}

constexpr long double ipow_ld(long double base, int e) {
    long double r = 1.0L;
    for (int i = 0; i < e; ++i) {
        r *= base;
    }
    return r;
}

// V_k = (-1)^(k+N/2) sum_j j^(N/2) (2j)! / ((N/2-j)! j! (j-1)! (k-j)! (2j-k)!)
constexpr StehfestRow stehfest_row(int order) {
    StehfestRow v{};
    const int half = order / 2;
    for (int k = 1; k <= order; ++k) {
        long double acc = 0.0L;
        const int lo = (k + 1) / 2;
        const int hi = k < half ? k : half;
        for (int j = lo; j <= hi; ++j) {
            acc += ipow_ld(j, half) * factorial_ld(2 * j) /
                   (factorial_ld(half - j) * factorial_ld(j) * factorial_ld(j - 1) * factorial_ld(k - j) *
                    factorial_ld(2 * j - k));
        }
        v[k] = ((k + half) % 2 == 0) ? acc : -acc;
    }
    return v;
}

constexpr std::array<StehfestRow, kMaxStehfestOrder / 2 + 1> make_stehfest_tables() {
    std::array<StehfestRow, kMaxStehfestOrder / 2 + 1> tables{};
    for (int order = 2; order <= kMaxStehfestOrder; order += 2) {
        tables[order / 2] = stehfest_row(order);
    }
    return tables;
}

inline constexpr auto kStehfestTables = make_stehfest_tables();

}  // namespace detail

/// Gaver-Stehfest weights V_1..V_N (index 0 unused), computed at compile time in extended precision.
inline const detail::StehfestRow& stehfest_weights(int order) {
    if (order < kMinStehfestOrder || order > kMaxStehfestOrder || order % 2 != 0) {
        throw DomainError("Gaver-Stehfest order must be even and within [8, 20]");
    }
    return detail::kStehfestTables[order / 2];
}

/// Inverse Laplace transform of a real-valued transform F at t > 0 by the Gaver-Stehfest rule.
///
/// A transform callable with long double is evaluated in extended precision, which keeps the
/// alternating weighted sum clean up to order 20.
template <class F>
double gaver_stehfest(F&& transform, double t, int order = kDefaultStehfestOrder) {
    if (!(t > 0.0)) {
        throw DomainError("gaver_stehfest: t must be positive");
    }
    const auto& weights = stehfest_weights(order);
    const long double step = std::numbers::ln2_v<long double> / t;
    long double acc = 0.0L;
    for (int k = 1; k <= order; ++k) {
        long double value;
        if constexpr (std::is_invocable_r_v<long double, F, long double>) {
            value = transform(step * k);
        } else {
            value = transform(static_cast<double>(step * k));
        }
        if (!std::isfinite(value)) {
            const double s = static_cast<double>(step * k);
            throw InversionError("gaver_stehfest: transform is not finite at s = " + std::to_string(s), s);
        }
        acc += weights[k] * value;
    }
    return static_cast<double>(acc * step);
}

/// Fixed-Talbot inversion (Abate-Valko contour) of a transform with an analytic complex extension.
template <class F>
double talbot(F&& transform, double t, int nodes = 24) {
    if (!(t > 0.0)) {
        throw DomainError("talbot: t must be positive");
    }
    if (nodes < 4) {
        throw DomainError("talbot: needs at least 4 contour nodes");
    }
    using cplx = std::complex<double>;
    const double r = 2.0 * nodes / (5.0 * t);
    const cplx f0 = transform(cplx(r, 0.0));
    if (!std::isfinite(f0.real())) {
        throw InversionError("talbot: transform is not finite at s = " + std::to_string(r), r);
    }
    double acc = 0.5 * std::exp(r * t) * f0.real();
    for (int k = 1; k < nodes; ++k) {
        const double theta = k * std::numbers::pi / nodes;
        const double cot = std::cos(theta) / std::sin(theta);
        const cplx s(r * theta * cot, r * theta);
        const double sigma = theta + (theta * cot - 1.0) * cot;
        const cplx value = transform(s);
        if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
            throw InversionError("talbot: transform is not finite on the contour", std::abs(s));
        }
        acc += (std::exp(t * s) * value * cplx(1.0, sigma)).real();
    }
    return r / nodes * acc;
}

/// Memo table for Gaver-Stehfest results keyed by (transform id, t, order). Safe for concurrent use.
class InversionCache {
public:
    template <class F>
    double gaver_stehfest(const std::string& transform_id, F&& transform, double t,
                          int order = kDefaultStehfestOrder) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &t, sizeof bits);
        auto key = std::make_tuple(transform_id, bits, order);
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(key); it != entries_.end()) {
                return it->second;
            }
        }
        const double value = tfhp::gaver_stehfest(std::forward<F>(transform), t, order);
        std::lock_guard lock(mutex_);
        entries_.emplace(std::move(key), value);
        return value;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::tuple<std::string, std::uint64_t, int>, double> entries_;
};

/// E[exp(-gamma E_f(t))] by inverting f(s) / (s (gamma + f(s))).
inline double phi_by_inversion(const BernsteinSpec& spec, double gamma, double t,
                               int order = kDefaultStehfestOrder) {
    if (t == 0.0) {
        return 1.0;
    }
    return gaver_stehfest(
        [&](long double s) {
            const long double f = eval_f(spec, s);
            return f / (s * (gamma + f));
        },
        t, order);
}

/// E[E_f(t)], whose Laplace transform in t is 1 / (s f(s)).
inline double invert_mean_inverse_subordinator(const BernsteinSpec& spec, double t,
                                               int order = kDefaultStehfestOrder) {
    if (!(t > 0.0)) {
        throw DomainError("invert_mean_inverse_subordinator: t must be positive");
    }
    return gaver_stehfest([&](long double s) { return 1.0L / (s * eval_f(spec, s)); }, t, order);
}

}  // namespace tfhp
