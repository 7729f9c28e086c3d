#pragma once

#include <cstddef>

namespace tfhp {

/// Positive beta-stable draws with Laplace transform exp(-dt s^beta), Kanter's representation.
///
/// u and v are uniforms on (0, 1); log_scale = log(dt) / beta. Compiled separately with
/// vectorised math (src/stable_batch.cpp), so results are reproducible per build, not across
/// builds with different instruction sets.
void stable_batch(std::size_t n, const double* u, const double* v, double beta, double log_scale, double* out);

}  // namespace tfhp
