// Probability tables over finite outcome spaces and the entropy /
// divergence functionals on them. All values are immutable after
// construction; every operation is a pure function.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hime/common.hpp"
#include "hime/sigma.hpp"
#include "hime/transform.hpp"

namespace hime {

class TabularDistribution {
public:
  explicit TabularDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw schema_error("distribution must have at least one outcome");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      const double p = probs_[i];
      if (!(p >= 0.0) || !std::isfinite(p))
        throw schema_error("probability at index " + std::to_string(i) +
                           " must be a finite nonnegative real");
      sum += p;
    }
    // Accepts rounding-level deviation from unit mass (summation error grows
    // like n*eps, ~1e-10 at a million outcomes) and renormalizes; anything
    // past 1e-9 is a caller bug, not rounding.
    if (std::fabs(sum - 1.0) > 1e-9)
      throw schema_error("probabilities sum to " + std::to_string(sum) +
                         ", outside the 1e-9 normalization tolerance");
    if (sum != 1.0)
      for (double& p : probs_) p /= sum;
  }

  static TabularDistribution uniform(std::size_t n) {
    return TabularDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static TabularDistribution point_mass(std::size_t n, std::size_t at) {
    std::vector<double> p(n, 0.0);
    p.at(at) = 1.0;
    return TabularDistribution(std::move(p));
  }

  // Normalizes an arbitrary nonnegative weight vector (used internally where
  // normalization is established by construction up to rounding).
  static TabularDistribution from_weights(std::vector<double> w) {
    double sum = 0.0;
    for (double x : w) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw numeric_error("non-finite or negative weight");
      sum += x;
    }
    if (!(sum > 0.0)) throw numeric_error("weight vector has zero total mass");
    for (double& x : w) x /= sum;
    return TabularDistribution(std::move(w));
  }

  std::size_t n() const { return probs_.size(); }
  double p(std::size_t x) const { return probs_[x]; }
  const std::vector<double>& probs() const { return probs_; }

private:
  std::vector<double> probs_;
};

// Conditionals of the fine outcome given each coarse outcome. Row y is
// stored aligned with step.preimage(y) (total storage = fine size), so
// row y is supported inside the preimage of y by representation.
class ConditionalTable {
public:
  explicit ConditionalTable(const TransformStep& step)
      : fine_size_(step.domain_size()), rows_(step.codomain_size()) {
    for (std::size_t y = 0; y < rows_.size(); ++y)
      rows_[y].assign(step.preimage(y).size(), 0.0);
  }

  std::size_t fine_size() const { return fine_size_; }
  std::size_t coarse_size() const { return rows_.size(); }
  std::vector<double>& row(std::size_t y) { return rows_.at(y); }
  const std::vector<double>& row(std::size_t y) const { return rows_.at(y); }

  // Row y expanded onto the full fine space.
  TabularDistribution expand_row(const TransformStep& step, std::size_t y) const {
    std::vector<double> full(fine_size_, 0.0);
    const auto& pre = step.preimage(y);
    for (std::size_t j = 0; j < pre.size(); ++j) full[pre[j]] = rows_.at(y)[j];
    return TabularDistribution::from_weights(std::move(full));
  }

private:
  std::size_t fine_size_;
  std::vector<std::vector<double>> rows_;
};

inline TabularDistribution pushforward(const TabularDistribution& P,
                                       const TransformStep& step) {
  if (P.n() != step.domain_size())
    throw schema_error("pushforward: distribution size != transform domain size");
  std::vector<double> out(step.codomain_size(), 0.0);
  for (std::size_t x = 0; x < P.n(); ++x) out[step(x)] += P.p(x);
  // Mass is conserved exactly in real arithmetic; renormalize the rounding.
  return TabularDistribution::from_weights(std::move(out));
}

inline double entropy(const TabularDistribution& P) {
  double h = 0.0;
  for (double p : P.probs()) h -= xlogx(p);
  return h < 0.0 ? 0.0 : h;
}

// Entropy of a raw normalized row.
inline double entropy_of(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) h -= xlogx(p);
  return h < 0.0 ? 0.0 : h;
}

// Relative entropy in nats; +inf signal when P puts mass where Q has none.
inline double kl(const TabularDistribution& P, const TabularDistribution& Q) {
  if (P.n() != Q.n()) throw schema_error("kl: size mismatch");
  double d = 0.0;
  for (std::size_t x = 0; x < P.n(); ++x) {
    const double p = P.p(x);
    if (p == 0.0) continue;
    const double q = Q.p(x);
    if (q == 0.0) return kInf;
    d += p * std::log(p / q);
  }
  return d < 0.0 ? 0.0 : d;
}

inline double total_variation(const TabularDistribution& P,
                              const TabularDistribution& Q) {
  if (P.n() != Q.n()) throw schema_error("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t x = 0; x < P.n(); ++x) s += std::fabs(P.p(x) - Q.p(x));
  return 0.5 * s;
}

struct Disintegration {
  TabularDistribution coarse;
  ConditionalTable conditional;
};

// Factors P into its pushforward and the conditional of the fine outcome
// given the coarse one. Zero-mass coarse rows become uniform over the
// preimage: any valid row composes back to the same joint.
inline Disintegration disintegrate(const TabularDistribution& P,
                                   const TransformStep& step) {
  TabularDistribution coarse = pushforward(P, step);
  ConditionalTable cond(step);
  for (std::size_t y = 0; y < step.codomain_size(); ++y) {
    const auto& pre = step.preimage(y);
    auto& row = cond.row(y);
    const double mass = coarse.p(y);
    if (mass > 0.0) {
      for (std::size_t j = 0; j < pre.size(); ++j) row[j] = P.p(pre[j]) / mass;
    } else {
      for (std::size_t j = 0; j < pre.size(); ++j)
        row[j] = 1.0 / static_cast<double>(pre.size());
    }
  }
  return Disintegration{std::move(coarse), std::move(cond)};
}

inline TabularDistribution compose(const TabularDistribution& coarse,
                                   const ConditionalTable& cond,
                                   const TransformStep& step) {
  if (coarse.n() != cond.coarse_size() || step.codomain_size() != cond.coarse_size() ||
      step.domain_size() != cond.fine_size())
    throw schema_error("compose: shape mismatch");
  std::vector<double> fine(step.domain_size(), 0.0);
  for (std::size_t y = 0; y < coarse.n(); ++y) {
    const double mass = coarse.p(y);
    if (mass == 0.0) continue;
    const auto& pre = step.preimage(y);
    const auto& row = cond.row(y);
    for (std::size_t j = 0; j < pre.size(); ++j) fine[pre[j]] = mass * row[j];
  }
  return TabularDistribution::from_weights(std::move(fine));
}

// All level marginals of P along the chain: index i-1 holds the level-i
// pushforward, starting with P itself.
inline std::vector<TabularDistribution> level_marginals(const TabularDistribution& P,
                                                        const TransformChain& chain) {
  std::vector<TabularDistribution> levels;
  levels.reserve(chain.depth());
  levels.push_back(P);
  for (const auto& step : chain.steps())
    levels.push_back(pushforward(levels.back(), step));
  return levels;
}

inline double hierarchical_entropy(const TabularDistribution& P,
                                   const TransformChain& chain, const SigmaSchedule& s) {
  if (s.depth() != chain.depth())
    throw schema_error("hierarchical_entropy: sigma depth != chain depth");
  const auto levels = level_marginals(P, chain);
  double h = 0.0;
  for (std::size_t i = 1; i <= s.depth(); ++i) h += s.sigma(i) * entropy(levels[i - 1]);
  return h;
}

inline double hierarchical_kl(const TabularDistribution& P, const TabularDistribution& Q,
                              const TransformChain& chain, const SigmaSchedule& s) {
  if (s.depth() != chain.depth())
    throw schema_error("hierarchical_kl: sigma depth != chain depth");
  const auto pl = level_marginals(P, chain);
  const auto ql = level_marginals(Q, chain);
  double d = 0.0;
  for (std::size_t i = 1; i <= s.depth(); ++i) {
    const double term = kl(pl[i - 1], ql[i - 1]);
    if (is_inf_signal(term)) return kInf;
    d += s.sigma(i) * term;
  }
  return d;
}

inline double expected_value(const TabularDistribution& P, const std::vector<double>& f) {
  if (P.n() != f.size()) throw schema_error("expected_value: size mismatch");
  double e = 0.0;
  for (std::size_t x = 0; x < P.n(); ++x) e += P.p(x) * f[x];
  return e;
}

}  // namespace hime
