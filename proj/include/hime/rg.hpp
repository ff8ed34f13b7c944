// Exact hierarchical maximum-entropy solver on finite tabular spaces:
// the level recursion (initial tilt, pushforward, escort), assembly of the
// optimal joint through the stored conditionals, log-partition accounting,
// constraint root-finding, and Pareto sweeps.
//
// Per-level normalizer convention: level_logZ[i-1] stores the weighted
// contribution sigma_bar_i * log Z_i of level i, so that
// log_partition = sum(level_logZ) satisfies the variational identity
// H_{(sigma,T)}(P) - lambda*E_P[L] = log Z - D_{(sigma,T)}(P || joint)
// for every schedule, and d/dlambda log Z = -E_joint[L].
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hime/common.hpp"
#include "hime/escort.hpp"
#include "hime/sigma.hpp"
#include "hime/tabular.hpp"
#include "hime/transform.hpp"

namespace hime {

class LossTable {
public:
  explicit LossTable(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw schema_error("loss table must be non-empty");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i]))
        throw schema_error("loss value at index " + std::to_string(i) +
                           " must be finite");
  }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t x) const { return values_[x]; }
  const std::vector<double>& values() const { return values_; }

private:
  std::vector<double> values_;
};

struct SolveReport {
  double lambda = 0.0;
  std::vector<TabularDistribution> level_dists;  // P^(i), i = 1..d
  std::vector<double> level_logZ;                // sigma_bar_i * log Z_i
  std::vector<ConditionalTable> conditionals;    // level i given level i+1
  // Materialized whenever the finest space fits the cap; coarser joints are
  // always reachable through level_dists.back() plus the conditional stack.
  std::optional<TabularDistribution> joint;
  std::vector<double> entropy_vector;  // H(X^(i)) under the optimal joint
  double expected_loss = 0.0;
  double log_partition = 0.0;  // = sum(level_logZ)
  bool non_monotone = false;   // set when constraint bracketing saw non-monotone means
};

struct RgOptions {
  // Finest-space tables above this size are not materialized; expectations
  // and entropies then run through the conditional stack instead.
  std::size_t materialize_cap = std::size_t{1} << 20;
};

inline double log_partition(const SolveReport& report) {
  double s = 0.0;
  for (double z : report.level_logZ) s += z;
  return s;
}

namespace detail {

// Shared tail of both algorithms: conditionals are already built, level
// distributions known; assemble the joint (or its lazy surrogates) and the
// report summary fields.
inline void assemble_report(SolveReport& rep, const LossTable& L,
                            const TransformChain& chain, const RgOptions& opts) {
  const std::size_t d = chain.depth();
  rep.log_partition = log_partition(rep);
  rep.entropy_vector.assign(d, 0.0);

  // A single-level report is its own joint regardless of the cap.
  const bool materialize = L.size() <= opts.materialize_cap || d == 1;

  // Marginals of the joint from the top down: M_d = P^(d),
  // M_i = compose(M_{i+1}, cond_i). The finest marginal is the joint itself.
  std::vector<TabularDistribution> marginals;
  marginals.reserve(d);
  marginals.push_back(rep.level_dists.back());
  for (std::size_t i = d - 1; i >= 1; --i) {
    if (i == 1 && !materialize) break;
    marginals.push_back(
        compose(marginals.back(), rep.conditionals[i - 1], chain.step(i)));
  }
  // marginals[j] is the level-(d-j) marginal.
  for (std::size_t j = 0; j < marginals.size(); ++j)
    rep.entropy_vector[d - 1 - j] = entropy(marginals[j]);

  if (materialize) {
    rep.joint = std::move(marginals.back());
    rep.expected_loss = expected_value(*rep.joint, L.values());
    return;
  }

  // Lazy path. Finest entropy via the chain rule: H(X^(1)) = H(X^(2)) +
  // sum_y M_2(y) H(row_y); expected loss via the backward conditional stack.
  const TabularDistribution& m2 = marginals.back();  // level-2 marginal
  double cond_h = 0.0;
  for (std::size_t y = 0; y < m2.n(); ++y)
    cond_h += m2.p(y) * entropy_of(rep.conditionals[0].row(y));
  rep.entropy_vector[0] = rep.entropy_vector[1] + cond_h;

  std::vector<double> loss = L.values();
  for (std::size_t i = 1; i < d; ++i) {
    const TransformStep& step = chain.step(i);
    std::vector<double> up(step.codomain_size(), 0.0);
    for (std::size_t y = 0; y < step.codomain_size(); ++y) {
      const auto& pre = step.preimage(y);
      const auto& row = rep.conditionals[i - 1].row(y);
      double e = 0.0;
      for (std::size_t j = 0; j < pre.size(); ++j) e += row[j] * loss[pre[j]];
      up[y] = e;
    }
    loss.swap(up);
  }
  rep.expected_loss = expected_value(rep.level_dists.back(), loss);
}

inline void check_shapes(const LossTable& L, const TransformChain& chain,
                         const SigmaSchedule& s) {
  if (s.depth() != chain.depth())
    throw schema_error("sigma depth != chain depth");
  if (!chain.steps().empty() && chain.steps().front().domain_size() != L.size())
    throw schema_error("loss table size != finest space size");
}

}  // namespace detail

// Level recursion for the entropy-side problem: P^(1) proportional to
// exp(-(lambda/sigma_1) L), then alternate pushforward and escort with
// exponent sigma_bar_i / sigma_bar_{i+1}.
inline SolveReport run_rg(const LossTable& L, const TransformChain& chain,
                          const SigmaSchedule& s, double lambda,
                          const RgOptions& opts = {}) {
  detail::check_shapes(L, chain, s);
  const std::size_t d = chain.depth();

  SolveReport rep;
  rep.lambda = lambda;

  std::vector<double> logits(L.size());
  for (std::size_t x = 0; x < L.size(); ++x) {
    logits[x] = -(lambda / s.sigma(1)) * L[x];
    if (!std::isfinite(logits[x]))
      throw numeric_error("level-1 weight overflow at index " + std::to_string(x));
  }
  const double log_z1 = log_sum_exp(logits);
  std::vector<double> p1(L.size());
  for (std::size_t x = 0; x < L.size(); ++x) p1[x] = std::exp(logits[x] - log_z1);
  rep.level_dists.push_back(TabularDistribution::from_weights(std::move(p1)));
  rep.level_logZ.push_back(s.sigma_bar(1) * log_z1);

  for (std::size_t i = 1; i < d; ++i) {
    Disintegration dis = disintegrate(rep.level_dists.back(), chain.step(i));
    EscortResult esc = escort(dis.coarse, s.ratio(i));
    rep.conditionals.push_back(std::move(dis.conditional));
    rep.level_dists.push_back(std::move(esc.dist));
    rep.level_logZ.push_back(s.sigma_bar(i + 1) * esc.log_z);
  }

  detail::assemble_report(rep, L, chain, opts);
  return rep;
}

// Relative-entropy variant: the initial tilt multiplies the base density and
// each escort interpolates toward the base's own level marginal.
inline SolveReport run_generalized_rg(const LossTable& L, const TransformChain& chain,
                                      const SigmaSchedule& s, double lambda,
                                      const TabularDistribution& base,
                                      const RgOptions& opts = {}) {
  detail::check_shapes(L, chain, s);
  if (base.n() != L.size())
    throw schema_error("base distribution size != finest space size");
  const std::size_t d = chain.depth();
  const auto base_levels = level_marginals(base, chain);

  SolveReport rep;
  rep.lambda = lambda;

  std::vector<double> logits(L.size(), -kInf);
  bool any = false;
  for (std::size_t x = 0; x < L.size(); ++x) {
    if (base.p(x) == 0.0) continue;
    logits[x] = -(lambda / s.sigma(1)) * L[x] + std::log(base.p(x));
    if (!std::isfinite(logits[x]))
      throw numeric_error("level-1 weight overflow at index " + std::to_string(x));
    any = true;
  }
  if (!any) throw degenerate_support_error("base distribution has empty support");
  const double log_z1 = log_sum_exp(logits);
  std::vector<double> p1(L.size(), 0.0);
  for (std::size_t x = 0; x < L.size(); ++x)
    if (logits[x] > -kInf) p1[x] = std::exp(logits[x] - log_z1);
  rep.level_dists.push_back(TabularDistribution::from_weights(std::move(p1)));
  rep.level_logZ.push_back(s.sigma_bar(1) * log_z1);

  for (std::size_t i = 1; i < d; ++i) {
    Disintegration dis = disintegrate(rep.level_dists.back(), chain.step(i));
    EscortResult esc = generalized_escort(dis.coarse, base_levels[i], s.ratio(i));
    rep.conditionals.push_back(std::move(dis.conditional));
    rep.level_dists.push_back(std::move(esc.dist));
    rep.level_logZ.push_back(s.sigma_bar(i + 1) * esc.log_z);
  }

  detail::assemble_report(rep, L, chain, opts);
  return rep;
}

// |H_{(sigma,T)}(P) - lambda*E_P[L] - log Z + D_{(sigma,T)}(P||joint)|.
// Returns the +inf signal when the divergence does (P outside the joint's
// support); callers treat that as "skip", the identity holds formally.
inline double verify_variational_identity(const TabularDistribution& P,
                                          const SolveReport& report, const LossTable& L,
                                          const TransformChain& chain,
                                          const SigmaSchedule& s) {
  if (!report.joint)
    throw schema_error("identity verification requires a materialized joint");
  const double lhs =
      hierarchical_entropy(P, chain, s) - report.lambda * expected_value(P, L.values());
  const double div = hierarchical_kl(P, *report.joint, chain, s);
  if (is_inf_signal(div)) return kInf;
  return std::fabs(lhs - (report.log_partition - div));
}

// |D_{(sigma,T)}(P||Q) + lambda*E_P[L] - D_{(sigma,T)}(P||joint) + log Z|.
inline double verify_relative_identity(const TabularDistribution& P,
                                       const SolveReport& report, const LossTable& L,
                                       const TransformChain& chain,
                                       const SigmaSchedule& s,
                                       const TabularDistribution& base) {
  if (!report.joint)
    throw schema_error("identity verification requires a materialized joint");
  const double to_base = hierarchical_kl(P, base, chain, s);
  const double to_joint = hierarchical_kl(P, *report.joint, chain, s);
  if (is_inf_signal(to_base) || is_inf_signal(to_joint)) return kInf;
  const double lhs = to_base + report.lambda * expected_value(P, L.values());
  return std::fabs(lhs - (to_joint - report.log_partition));
}

// Root-finds E_joint[L] = mu by geometric bracket expansion from [-1,1]
// followed by bisection. The constraint mean is monotone in lambda on every
// instance met in practice; if the expansion ladder ever observes otherwise,
// the widest sign-change bracket is used and the report is flagged.
inline std::pair<double, SolveReport> solve_lambda(const LossTable& L,
                                                   const TransformChain& chain,
                                                   const SigmaSchedule& s, double mu,
                                                   double tol,
                                                   const RgOptions& opts = {}) {
  if (!(tol > 0.0)) throw schema_error("solve tolerance must be positive");
  const auto g = [&](double lambda) {
    SolveReport r = run_rg(L, chain, s, lambda, opts);
    return std::make_pair(r.expected_loss - mu, std::move(r));
  };

  // Evaluation ladder ordered by lambda, tracking (lambda, gap).
  std::vector<std::pair<double, double>> ladder;
  auto eval = [&](double lambda) {
    auto [gap, rep] = g(lambda);
    ladder.emplace_back(lambda, gap);
    return std::make_pair(gap, std::move(rep));
  };

  double lo = -1.0, hi = 1.0;
  auto [glo, rep_lo] = eval(lo);
  if (std::fabs(glo) <= tol) {
    rep_lo.non_monotone = false;
    return {lo, std::move(rep_lo)};
  }
  auto [ghi, rep_hi] = eval(hi);
  if (std::fabs(ghi) <= tol) return {hi, std::move(rep_hi)};

  // E[L] decreases in lambda: the root needs gap > 0 on the left end and
  // gap < 0 on the right. Expand whichever end has the wrong sign.
  constexpr double kLambdaLimit = 1e6;
  while (glo < 0.0 || ghi > 0.0) {
    if (glo < 0.0) {
      lo *= 2.0;
      if (std::fabs(lo) > kLambdaLimit)
        throw infeasible_error("constraint mean unreachable: lambda exceeded 1e6");
      std::tie(glo, rep_lo) = eval(lo);
      if (std::fabs(glo) <= tol) return {lo, std::move(rep_lo)};
    }
    if (ghi > 0.0) {
      hi *= 2.0;
      if (std::fabs(hi) > kLambdaLimit)
        throw infeasible_error("constraint mean unreachable: lambda exceeded 1e6");
      std::tie(ghi, rep_hi) = eval(hi);
      if (std::fabs(ghi) <= tol) return {hi, std::move(rep_hi)};
    }
  }

  // Monotonicity audit of the ladder; on violation, bisect the widest
  // observed sign change instead of the innermost.
  std::sort(ladder.begin(), ladder.end());
  bool non_monotone = false;
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    const double slack =
        1e-9 * (1.0 + std::max(std::fabs(ladder[i].second),
                               std::fabs(ladder[i - 1].second)));
    if (ladder[i].second > ladder[i - 1].second + slack) non_monotone = true;
  }
  if (non_monotone) {
    double best_lo = lo, best_hi = hi, widest = hi - lo;
    for (std::size_t i = 1; i < ladder.size(); ++i) {
      if (ladder[i - 1].second > 0.0 && ladder[i].second < 0.0 &&
          ladder[i].first - ladder[i - 1].first > widest) {
        best_lo = ladder[i - 1].first;
        best_hi = ladder[i].first;
        widest = best_hi - best_lo;
      }
    }
    lo = best_lo;
    hi = best_hi;
  }

  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    auto [gm, rep] = eval(mid);
    if (std::fabs(gm) <= tol) {
      rep.non_monotone = non_monotone;
      return {mid, std::move(rep)};
    }
    if (gm > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  throw numeric_error("constraint bisection failed to reach tolerance");
}

struct ParetoPoint {
  std::vector<double> sigma;
  std::vector<double> entropy_vector;
  double lambda = 0.0;
  double log_partition = 0.0;
};

// One constrained solve per schedule; grid points run in parallel under the
// worker cap and land in input order, so output is identical to a
// sequential sweep. Strictly dominated entropy vectors (possible only
// through rounding) are dropped.
inline std::vector<ParetoPoint> pareto_sweep(const LossTable& L,
                                             const TransformChain& chain, double mu,
                                             const std::vector<SigmaSchedule>& grid,
                                             double tol = 1e-10,
                                             const RgOptions& opts = {}) {
  std::vector<ParetoPoint> points(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    auto [lambda, rep] = solve_lambda(L, chain, grid[i], mu, tol, opts);
    points[i] = ParetoPoint{grid[i].values(), rep.entropy_vector, lambda,
                            rep.log_partition};
  });

  std::vector<char> dominated(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size() && !dominated[i]; ++j) {
      if (i == j) continue;
      bool all_ge = true, some_gt = false;
      for (std::size_t k = 0; k < points[i].entropy_vector.size(); ++k) {
        if (points[j].entropy_vector[k] < points[i].entropy_vector[k] - 1e-12)
          all_ge = false;
        if (points[j].entropy_vector[k] > points[i].entropy_vector[k] + 1e-9)
          some_gt = true;
      }
      dominated[i] = all_ge && some_gt;
    }
  }
  std::vector<ParetoPoint> kept;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!dominated[i]) kept.push_back(std::move(points[i]));
  return kept;
}

}  // namespace hime
