// Escort (normalized pointwise power) and generalized escort (normalized
// geometric interpolation) operators. Powers are taken in log space so
// small probabilities under large exponents neither underflow nor lose
// the exact-zero support pattern.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hime/common.hpp"
#include "hime/tabular.hpp"

namespace hime {

struct EscortResult {
  TabularDistribution dist;
  double z;      // normalizer in linear scale
  double log_z;  // exact log of the normalizer
};

inline EscortResult escort(const TabularDistribution& P, double theta) {
  if (!(theta > 0.0)) throw schema_error("escort exponent must be positive");
  const std::size_t n = P.n();
  std::vector<double> logits(n, -kInf);
  for (std::size_t x = 0; x < n; ++x)
    if (P.p(x) > 0.0) logits[x] = theta * std::log(P.p(x));
  const double log_z = log_sum_exp(logits);
  std::vector<double> out(n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    if (logits[x] > -kInf) out[x] = std::exp(logits[x] - log_z);
  return EscortResult{TabularDistribution::from_weights(std::move(out)),
                      std::exp(log_z), log_z};
}

// result ∝ p1^theta * p2^(1-theta); Z below 1e-300 means the supports are
// effectively disjoint and the interpolation is degenerate.
inline EscortResult generalized_escort(const TabularDistribution& P1,
                                       const TabularDistribution& P2, double theta) {
  if (P1.n() != P2.n()) throw schema_error("generalized_escort: size mismatch");
  if (!(theta >= 0.0 && theta <= 1.0))
    throw schema_error("generalized_escort exponent must lie in [0,1]");
  if (theta == 1.0) return EscortResult{P1, 1.0, 0.0};
  if (theta == 0.0) return EscortResult{P2, 1.0, 0.0};
  const std::size_t n = P1.n();
  std::vector<double> logits(n, -kInf);
  for (std::size_t x = 0; x < n; ++x)
    if (P1.p(x) > 0.0 && P2.p(x) > 0.0)
      logits[x] = theta * std::log(P1.p(x)) + (1.0 - theta) * std::log(P2.p(x));
  const double log_z = log_sum_exp(logits);
  const double z = std::exp(log_z);
  if (!(z >= 1e-300))
    throw degenerate_support_error(
        "generalized escort normalizer vanished: supports are disjoint");
  std::vector<double> out(n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    if (logits[x] > -kInf) out[x] = std::exp(logits[x] - log_z);
  return EscortResult{TabularDistribution::from_weights(std::move(out)), z, log_z};
}

}  // namespace hime
