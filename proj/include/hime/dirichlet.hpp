// Closed-form hierarchy for logarithmic losses on the simplex. Pair
// aggregation keeps Dirichlet laws Dirichlet, and the escort stage acts on
// standard concentration parameters as beta -> t(beta - 1) + 1, so each
// level is described by one positive parameter vector of half the length.
//
// The operator-semantics recursion beta_{i+1} = t(aggregate(beta_i) - 1) + 1
// and the shift-free recursion beta_{i+1} = t * aggregate(beta_i) disagree
// whenever t != 1; this module computes the first (it is what
// pushforward-then-escort does to the density, and the quadrature oracle
// confirms it) and reports the second alongside as a diagnostic instead of
// silently dropping it.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hime/common.hpp"
#include "hime/rng.hpp"
#include "hime/sigma.hpp"

namespace hime::dirichlet {

struct DirichletFamily {
  std::vector<double> beta;

  explicit DirichletFamily(std::vector<double> b) : beta(std::move(b)) {
    if (beta.empty()) throw schema_error("Dirichlet family must be non-empty");
    for (std::size_t j = 0; j < beta.size(); ++j)
      if (!(beta[j] > 0.0) || !std::isfinite(beta[j]))
        throw schema_error("beta[" + std::to_string(j + 1) +
                           "] must be a positive real");
  }

  std::size_t size() const { return beta.size(); }
};

// Summing adjacent coordinate pairs of a Dirichlet vector yields a
// Dirichlet vector with pairwise-summed parameters. Total concentration is
// preserved exactly.
inline DirichletFamily aggregate_pairs(const DirichletFamily& f) {
  if (f.size() % 2 != 0)
    throw schema_error("aggregate_pairs needs an even parameter count");
  std::vector<double> out(f.size() / 2);
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = f.beta[2 * j] + f.beta[2 * j + 1];
  return DirichletFamily(std::move(out));
}

// Normalized pointwise power of the density: exponents beta_j - 1 scale by
// t, so beta'_j = t (beta_j - 1) + 1. For t in (0,1] and beta > 0 the image
// stays positive; the check is kept as a guard with component naming.
inline DirichletFamily dirichlet_escort(const DirichletFamily& f, double t) {
  if (!(t > 0.0) || t > 1.0)
    throw schema_error("escort exponent must lie in (0, 1]");
  if (t == 1.0) return f;  // exact identity, not just up to rounding
  std::vector<double> out(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    out[j] = t * (f.beta[j] - 1.0) + 1.0;
    if (!(out[j] > 0.0))
      throw numeric_error("escort breaks Dirichlet validity at component " +
                          std::to_string(j + 1) + ": beta' = " +
                          std::to_string(out[j]));
  }
  return DirichletFamily(std::move(out));
}

namespace detail {

inline void check_flow_args(const std::vector<double>& alpha, double lambda,
                            const SigmaSchedule& s, std::size_t levels) {
  if (levels < 1) throw schema_error("flow needs at least one level");
  if (s.depth() != levels) throw schema_error("sigma depth != levels");
  if (!(lambda > 0.0)) throw schema_error("lambda must be positive");
  if (alpha.empty()) throw schema_error("alpha must be non-empty");
  for (std::size_t j = 0; j < alpha.size(); ++j)
    if (!(alpha[j] >= 0.0) || !std::isfinite(alpha[j]))
      throw schema_error("alpha[" + std::to_string(j + 1) +
                         "] must be a nonnegative real");
  const std::size_t halvings = std::size_t{1} << (levels - 1);
  if (alpha.size() % halvings != 0 || alpha.size() / halvings < 2)
    throw schema_error("alpha length must be divisible by 2^(levels-1) with a "
                       "final level of at least 2 components");
}

}  // namespace detail

// Level families under the loss L(x) = -alpha^T log x: level 1 is
// Dir(lambda alpha / sigma_1 + 1), and each further level aggregates pairs
// then escorts with the accumulated-weight ratio.
inline std::vector<DirichletFamily> dirichlet_flow(const std::vector<double>& alpha,
                                                   double lambda,
                                                   const SigmaSchedule& s,
                                                   std::size_t levels) {
  detail::check_flow_args(alpha, lambda, s, levels);
  std::vector<double> b1(alpha.size());
  for (std::size_t j = 0; j < alpha.size(); ++j)
    b1[j] = lambda * alpha[j] / s.sigma(1) + 1.0;
  std::vector<DirichletFamily> out;
  out.emplace_back(std::move(b1));
  for (std::size_t i = 1; i < levels; ++i)
    out.push_back(dirichlet_escort(aggregate_pairs(out.back()), s.ratio(i)));
  return out;
}

// Same start, but each step multiplies the aggregated parameters by the
// ratio without the escort's unit shift. Kept purely as a diagnostic
// trajectory; it is NOT the law the cascade produces when t != 1.
struct DirichletFlowDiagnostic {
  std::vector<DirichletFamily> flow;        // operator semantics
  std::vector<DirichletFamily> shift_free;  // ratio-scaled aggregation only
};

inline DirichletFlowDiagnostic dirichlet_flow_diagnostic(
    const std::vector<double>& alpha, double lambda, const SigmaSchedule& s,
    std::size_t levels) {
  DirichletFlowDiagnostic d;
  d.flow = dirichlet_flow(alpha, lambda, s, levels);
  d.shift_free.push_back(d.flow.front());
  for (std::size_t i = 1; i < levels; ++i) {
    DirichletFamily agg = aggregate_pairs(d.shift_free.back());
    const double t = s.ratio(i);
    for (double& b : agg.beta) b *= t;
    d.shift_free.push_back(std::move(agg));
  }
  return d;
}

// Log density at a simplex point, with boundary conventions: a zero
// coordinate gives -inf for beta_j > 1 (density vanishes), contributes
// nothing for beta_j = 1, and signals +inf for beta_j < 1 (integrable
// singularity).
inline double dirichlet_log_density(const DirichletFamily& f,
                                    const std::vector<double>& x) {
  if (x.size() != f.size())
    throw schema_error("density point size != parameter count");
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] >= 0.0) || !std::isfinite(x[j]))
      throw schema_error("simplex point must have nonnegative finite entries");
    sum += x[j];
  }
  if (std::fabs(sum - 1.0) > 1e-10)
    throw schema_error("point is off the simplex: coordinates sum to " +
                       std::to_string(sum));
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) total += f.beta[j];
  acc = std::lgamma(total);
  for (std::size_t j = 0; j < f.size(); ++j) acc -= std::lgamma(f.beta[j]);
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (x[j] == 0.0) {
      if (f.beta[j] > 1.0) return -kInf;
      if (f.beta[j] < 1.0) return kInf;
      continue;  // beta_j = 1 contributes (beta-1) log x = 0
    }
    acc += (f.beta[j] - 1.0) * std::log(x[j]);
  }
  return acc;
}

// Gamma-variate construction, deterministic per (seed, index).
inline std::vector<std::vector<double>> dirichlet_sample(const DirichletFamily& f,
                                                         std::uint64_t seed,
                                                         std::size_t count) {
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Rng rng(seed, idx);
    std::vector<double> g(f.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
      g[j] = rng.gamma(f.beta[j]);
      sum += g[j];
    }
    if (!(sum > 0.0)) throw numeric_error("gamma draws summed to zero");
    for (double& v : g) v /= sum;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace hime::dirichlet
