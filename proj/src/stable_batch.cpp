#include "tfhp/stable_batch.hpp"

#include <cmath>
#include <numbers>

namespace tfhp {

void stable_batch(std::size_t n, const double* u, const double* v, double beta, double log_scale, double* out) {
    const double inv_beta = 1.0 / beta;
    const double p = (1.0 - beta) / beta;
    const double one_minus = 1.0 - beta;
    // S = dt^(1/b) sin(b x) / sin(x)^(1/b) * (sin((1-b) x) / w)^((1-b)/b), x ~ U(0, pi), w ~ Exp(1)
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::numbers::pi * u[i];
        const double w = -std::log(v[i]);
        out[i] = std::exp(log_scale + std::log(std::sin(beta * x)) - inv_beta * std::log(std::sin(x)) +
                          p * (std::log(std::sin(one_minus * x)) - std::log(w)));
    }
}

}  // namespace tfhp
