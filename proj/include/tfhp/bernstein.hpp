#pragma once

#include "tfhp/errors.hpp"
#include "tfhp/quadrature.hpp"

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tfhp {

struct TemperedStable {
    double beta;  // stability index in (0, 1)
    double nu;    // tempering rate, 0 gives the plain stable subordinator
};

struct GammaSubordinator {
    double shape_rate;  // p in f(s) = p ln(1 + s/q)
    double scale_rate;  // q
};

struct InverseGaussianSubordinator {
    double delta;  // f(s) = delta (sqrt(2s + g^2) - g)
    double g;
};

struct LevyAtom {
    double location;  // jump size x > 0
    double weight;    // measure mass w > 0
};

/// Finite triplet: kill rate a, drift b and an atomic Levy measure.
struct CustomSubordinator {
    double kill_rate;
    double drift;
    std::vector<LevyAtom> atoms;
};

/// A Bernstein function f together with its Levy triplet.
///
/// Parameters are validated once at construction; evaluation never re-checks them.
class BernsteinSpec {
public:
    using Variant =
        std::variant<TemperedStable, GammaSubordinator, InverseGaussianSubordinator, CustomSubordinator>;

    static BernsteinSpec tempered_stable(double beta, double nu) {
        if (!(beta > 0.0 && beta < 1.0)) {
            throw ValidationError("tempered stable: beta must lie in (0, 1)");
        }
        if (!(nu >= 0.0) || !std::isfinite(nu)) {
            throw ValidationError("tempered stable: nu must be finite and >= 0");
        }
        return BernsteinSpec(TemperedStable{beta, nu});
    }

    static BernsteinSpec stable(double beta) { return tempered_stable(beta, 0.0); }

    static BernsteinSpec gamma(double p, double q) {
        if (!(p > 0.0) || !(q > 0.0) || !std::isfinite(p) || !std::isfinite(q)) {
            throw ValidationError("gamma subordinator: p and q must be positive");
        }
        return BernsteinSpec(GammaSubordinator{p, q});
    }

    static BernsteinSpec inverse_gaussian(double delta, double g) {
        if (!(delta > 0.0) || !(g > 0.0) || !std::isfinite(delta) || !std::isfinite(g)) {
            throw ValidationError("inverse Gaussian subordinator: delta and g must be positive");
        }
        return BernsteinSpec(InverseGaussianSubordinator{delta, g});
    }

    static BernsteinSpec custom(double kill_rate, double drift, std::vector<LevyAtom> atoms) {
        if (!(kill_rate >= 0.0) || !(drift >= 0.0) || !std::isfinite(kill_rate) || !std::isfinite(drift)) {
            throw ValidationError("custom subordinator: kill rate and drift must be >= 0");
        }
        for (const auto& atom : atoms) {
            if (!(atom.location > 0.0) || !(atom.weight > 0.0) || !std::isfinite(atom.location) ||
                !std::isfinite(atom.weight)) {
                throw ValidationError("custom subordinator: atoms need positive location and weight");
            }
        }
        if (drift == 0.0 && atoms.empty()) {
            throw ValidationError("custom subordinator: needs a drift or at least one atom");
        }
        return BernsteinSpec(CustomSubordinator{kill_rate, drift, std::move(atoms)});
    }

    const Variant& variant() const noexcept { return variant_; }

    template <class T>
    const T* get_if() const noexcept {
        return std::get_if<T>(&variant_);
    }

    std::string family() const {
        return std::visit(
            [](const auto& v) -> std::string {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, TemperedStable>) {
                    return v.nu == 0.0 ? "stable" : "tempered_stable";
                } else if constexpr (std::is_same_v<T, GammaSubordinator>) {
                    return "gamma";
                } else if constexpr (std::is_same_v<T, InverseGaussianSubordinator>) {
                    return "inverse_gaussian";
                } else {
                    return "custom";
                }
            },
            variant_);
    }

private:
    explicit BernsteinSpec(Variant v) : variant_(std::move(v)) {}

    Variant variant_;
};

namespace detail {

template <class Scalar>
Scalar eval_f_generic(const BernsteinSpec& spec, Scalar s) {
    return std::visit(
        [&](const auto& v) -> Scalar {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TemperedStable>) {
                if (v.nu == 0.0) {
                    return std::pow(s, v.beta);
                }
                return std::pow(s + v.nu, v.beta) - std::pow(Scalar(v.nu), v.beta);
            } else if constexpr (std::is_same_v<T, GammaSubordinator>) {
                return v.shape_rate * std::log(Scalar(1.0) + s / v.scale_rate);
            } else if constexpr (std::is_same_v<T, InverseGaussianSubordinator>) {
                return v.delta * (std::sqrt(Scalar(2.0) * s + v.g * v.g) - v.g);
            } else {
                Scalar acc = Scalar(v.kill_rate) + v.drift * s;
                for (const auto& atom : v.atoms) {
                    acc += atom.weight * (Scalar(1.0) - std::exp(-s * atom.location));
                }
                return acc;
            }
        },
        spec.variant());
}

}  // namespace detail

/// f(s) for s > 0.
inline double eval_f(const BernsteinSpec& spec, double s) {
    if (!(s > 0.0)) {
        throw DomainError("eval_f: s must be positive");
    }
    if (const auto* ts = spec.get_if<TemperedStable>(); ts && ts->nu > 0.0 && s < 1e-3 * ts->nu) {
        // (s+nu)^b - nu^b loses digits for s << nu
        return std::pow(ts->nu, ts->beta) * std::expm1(ts->beta * std::log1p(s / ts->nu));
    }
    if (const auto* g = spec.get_if<GammaSubordinator>()) {
        return g->shape_rate * std::log1p(s / g->scale_rate);
    }
    return detail::eval_f_generic<double>(spec, s);
}

/// Extended-precision evaluation, used inside Gaver-Stehfest sums.
inline long double eval_f(const BernsteinSpec& spec, long double s) {
    if (!(s > 0.0L)) {
        throw DomainError("eval_f: s must be positive");
    }
    if (const auto* ts = spec.get_if<TemperedStable>(); ts && ts->nu > 0.0 && s < 1e-3L * ts->nu) {
        const long double nu = ts->nu;
        return std::pow(nu, static_cast<long double>(ts->beta)) *
               std::expm1(ts->beta * std::log1p(s / nu));
    }
    if (const auto* g = spec.get_if<GammaSubordinator>()) {
        return g->shape_rate * std::log1p(s / g->scale_rate);
    }
    return detail::eval_f_generic<long double>(spec, s);
}

/// Analytic continuation of f off the real axis (principal branches), used by Talbot inversion.
inline std::complex<double> eval_f(const BernsteinSpec& spec, std::complex<double> s) {
    return detail::eval_f_generic<std::complex<double>>(spec, s);
}

/// Drift coefficient b of the Levy triplet; zero for every named family.
inline double drift_coefficient(const BernsteinSpec& spec) noexcept {
    if (const auto* c = spec.get_if<CustomSubordinator>()) {
        return c->drift;
    }
    return 0.0;
}

inline double kill_rate(const BernsteinSpec& spec) noexcept {
    if (const auto* c = spec.get_if<CustomSubordinator>()) {
        return c->kill_rate;
    }
    return 0.0;
}

/// Mean jump intensity f'(0+) when finite (infinite for the untempered stable case).
inline double mean_rate(const BernsteinSpec& spec) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TemperedStable>) {
                return v.nu == 0.0 ? HUGE_VAL : v.beta * std::pow(v.nu, v.beta - 1.0);
            } else if constexpr (std::is_same_v<T, GammaSubordinator>) {
                return v.shape_rate / v.scale_rate;
            } else if constexpr (std::is_same_v<T, InverseGaussianSubordinator>) {
                return v.delta / v.g;
            } else {
                double m = v.drift;
                for (const auto& atom : v.atoms) {
                    m += atom.weight * atom.location;
                }
                return m;
            }
        },
        spec.variant());
}

/// Tail of the Levy measure, a + v((s, inf)).
///
/// The tempered stable tail integrates the Levy density beta/Gamma(1-beta) x^(-beta-1) e^(-nu x)
/// numerically; the plain stable case has the closed form s^(-beta)/Gamma(1-beta).
inline double levy_tail(const BernsteinSpec& spec, double s) {
    if (!(s > 0.0)) {
        throw DomainError("levy_tail: s must be positive");
    }
    if (const auto* ts = spec.get_if<TemperedStable>()) {
        const double beta = ts->beta;
        const double scale = 1.0 / std::tgamma(1.0 - beta);
        if (ts->nu == 0.0) {
            return scale * std::pow(s, -beta);
        }
        const double nu = ts->nu;
        // x = s(1 + w): integrand bounded on [0, inf) with exponential decay
        auto density = [&](double w) {
            const double x = s * (1.0 + w);
            return s * beta * std::exp(-(beta + 1.0) * std::log(x) - nu * (x - s));
        };
        const auto r = integrate_adaptive(density, 0.0, std::numeric_limits<double>::infinity(), 1e-11,
                                          "levy_tail");
        return scale * std::exp(-nu * s) * r.value;
    }
    if (const auto* c = spec.get_if<CustomSubordinator>()) {
        double tail = c->kill_rate;
        for (const auto& atom : c->atoms) {
            if (atom.location > s) {
                tail += atom.weight;
            }
        }
        return tail;
    }
    throw NotImplementedError("levy_tail: only tempered stable and custom subordinators are supported");
}

}  // namespace tfhp
