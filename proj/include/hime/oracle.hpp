// Independent brute-force and numerical oracles used to validate every
// flow and solver. None of these share numerical kernels with the modules
// they check beyond scalar math, so agreement between the two sides is
// evidence rather than tautology. Size caps keep each call at desk scale.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hime/common.hpp"
#include "hime/rg.hpp"
#include "hime/sigma.hpp"
#include "hime/tabular.hpp"
#include "hime/transform.hpp"

namespace hime::oracle {

struct AscentResult {
  TabularDistribution dist;
  bool converged = false;
  std::size_t iterations = 0;
};

// Mirror ascent (multiplicative weights) on the simplex for the concave
// objective sum_i sigma_i H(X^(i)) - lambda E[L]. Multiplicative updates
// stay exactly feasible; the step halves whenever a trial step fails to
// improve, so the objective is monotone.
inline AscentResult projected_ascent_maxent(const LossTable& L,
                                            const TransformChain& chain,
                                            const SigmaSchedule& s, double lambda,
                                            std::size_t iters = 20000,
                                            double step = 0.5) {
  if (L.size() > 256) throw schema_error("ascent oracle capped at 256 outcomes");
  if (s.depth() != chain.depth()) throw schema_error("sigma depth != chain depth");

  const std::size_t n = L.size();
  std::vector<double> p(n, 1.0 / static_cast<double>(n));

  const auto objective = [&](const std::vector<double>& q) {
    return hierarchical_entropy(TabularDistribution(q), chain, s) -
           lambda * [&] {
             double e = 0.0;
             for (std::size_t x = 0; x < n; ++x) e += q[x] * L[x];
             return e;
           }();
  };

  // gradient_x = -sum_i sigma_i (log P_i(T^(i) x) + 1) - lambda L(x);
  // the constant -sum sigma_i is absorbed by the normalization.
  const auto gradient = [&](const std::vector<double>& q, std::vector<double>& g) {
    std::vector<double> level = q;
    for (std::size_t x = 0; x < n; ++x) g[x] = -lambda * L[x];
    std::vector<std::size_t> index(n);
    for (std::size_t x = 0; x < n; ++x) index[x] = x;
    for (std::size_t i = 1; i <= chain.depth(); ++i) {
      for (std::size_t x = 0; x < n; ++x)
        g[x] -= s.sigma(i) * std::log(std::max(level[index[x]], 1e-300));
      if (i == chain.depth()) break;
      const TransformStep& st = chain.step(i);
      std::vector<double> up(st.codomain_size(), 0.0);
      for (std::size_t y = 0; y < level.size(); ++y) up[st(y)] += level[y];
      for (std::size_t x = 0; x < n; ++x) index[x] = st(index[x]);
      level.swap(up);
    }
  };

  double eta = step;
  double f = objective(p);
  std::vector<double> g(n), trial(n);
  std::size_t it = 0;
  for (; it < iters; ++it) {
    gradient(p, g);
    const double gmax = *std::max_element(g.begin(), g.end());
    bool improved = false;
    while (eta > 1e-18) {
      double sum = 0.0;
      for (std::size_t x = 0; x < n; ++x) {
        trial[x] = p[x] * std::exp(eta * (g[x] - gmax));
        sum += trial[x];
      }
      for (std::size_t x = 0; x < n; ++x) trial[x] /= sum;
      const double ft = objective(trial);
      if (ft >= f - 1e-15) {
        const double gain = ft - f;
        p.swap(trial);
        f = ft;
        improved = true;
        if (gain <= 1e-12 && gain >= 0.0) {
          return AscentResult{TabularDistribution(p), true, it + 1};
        }
        eta = std::min(eta * 1.1, 4.0);
        break;
      }
      eta *= 0.5;
    }
    if (!improved) return AscentResult{TabularDistribution(p), true, it + 1};
  }
  return AscentResult{TabularDistribution(p), false, it};
}

inline double finite_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Assembles the fully coupled block precision (A diagonal, B below, B^T
// above), inverts densely, keeps the leading (m - drop_last) blocks of the
// covariance, and re-inverts. The result is the marginal precision of the
// kept blocks, independent of any recursion being checked against it.
inline Eigen::MatrixXd dense_gaussian_marginal(const Eigen::MatrixXd& A,
                                               const Eigen::MatrixXd& B, std::size_t k,
                                               std::size_t m, std::size_t drop_last) {
  if (m * k > 256) throw schema_error("dense marginal oracle capped at 256 dims");
  if (drop_last >= m) throw schema_error("cannot drop every block");
  const std::size_t n = m * k;
  Eigen::MatrixXd T(n, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      Eigen::MatrixXd blk = (i == j) ? A : (i > j ? B : Eigen::MatrixXd(B.transpose()));
      T.block(i * k, j * k, k, k) = blk;
    }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(T);
  if (!lu.isInvertible()) throw numeric_error("dense marginal: singular precision");
  const Eigen::MatrixXd cov = lu.inverse();
  const std::size_t keep = (m - drop_last) * k;
  const Eigen::MatrixXd cov_keep = cov.topLeftCorner(keep, keep);
  Eigen::FullPivLU<Eigen::MatrixXd> lu2(cov_keep);
  if (!lu2.isInvertible()) throw numeric_error("dense marginal: singular covariance");
  return lu2.inverse();
}

// Midpoint-rule table of a density on the 1-simplex parameterized by its
// first coordinate. Returns cell masses normalized to sum 1.
inline std::vector<double> simplex_grid_quadrature(
    const std::function<double(double)>& log_density, std::size_t resolution) {
  if (resolution < 100) throw schema_error("quadrature resolution must be >= 100");
  std::vector<double> logs(resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(resolution);
    logs[i] = log_density(x);
  }
  const double lse = log_sum_exp(logs);
  std::vector<double> table(resolution);
  for (std::size_t i = 0; i < resolution; ++i) table[i] = std::exp(logs[i] - lse);
  return table;
}

// Raw midpoint integral of exp(log_density) over [0,1]; a normalized
// density should integrate to 1 up to the quadrature error.
inline double simplex_grid_integral(const std::function<double(double)>& log_density,
                                    std::size_t resolution) {
  if (resolution < 100) throw schema_error("quadrature resolution must be >= 100");
  double acc = 0.0;
  for (std::size_t i = 0; i < resolution; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(resolution);
    acc += std::exp(log_density(x));
  }
  return acc / static_cast<double>(resolution);
}

// Spin helpers shared by the enumeration oracles and nothing else: spin j
// of configuration x is +1 when bit j is set.
inline int spin_of(std::uint32_t config, std::size_t j) {
  return (config >> j) & 1u ? 1 : -1;
}

inline int cyclic_bond_sum(std::uint32_t config, std::size_t n) {
  int s = 0;
  for (std::size_t j = 0; j < n; ++j)
    s += spin_of(config, j) * spin_of(config, (j + 1) % n);
  return s;
}

// Exact Gibbs table of the periodic nearest-neighbor chain.
inline TabularDistribution enumerate_ising(std::size_t n, double theta) {
  if (n > 16) throw schema_error("ising enumeration capped at 16 spins");
  const std::size_t states = std::size_t{1} << n;
  std::vector<double> logits(states);
  for (std::size_t x = 0; x < states; ++x)
    logits[x] = theta * cyclic_bond_sum(static_cast<std::uint32_t>(x), n);
  const double lse = log_sum_exp(logits);
  std::vector<double> probs(states);
  for (std::size_t x = 0; x < states; ++x) probs[x] = std::exp(logits[x] - lse);
  return TabularDistribution::from_weights(std::move(probs));
}

// Log partition of the enumerated chain, for checking closed forms.
inline double enumerate_ising_log_partition(std::size_t n, double theta) {
  if (n > 16) throw schema_error("ising enumeration capped at 16 spins");
  const std::size_t states = std::size_t{1} << n;
  std::vector<double> logits(states);
  for (std::size_t x = 0; x < states; ++x)
    logits[x] = theta * cyclic_bond_sum(static_cast<std::uint32_t>(x), n);
  return log_sum_exp(logits);
}

// Ground-truth hierarchical solve on the enumerated spin table: the loss is
// the negated cyclic bond sum scaled by J and each level decimates the
// odd-position spins.
inline SolveReport enumerate_rg_ising(std::size_t n, double J, double lambda,
                                      const SigmaSchedule& s, std::size_t levels) {
  if (n > 16) throw schema_error("ising enumeration capped at 16 spins");
  if (levels < 1 || s.depth() != levels) throw schema_error("levels != sigma depth");
  std::size_t spins = n;
  std::vector<TransformStep> steps;
  for (std::size_t i = 1; i < levels; ++i) {
    steps.push_back(TransformStep::even_spin_decimation(spins));
    spins /= 2;
  }
  const std::size_t states = std::size_t{1} << n;
  std::vector<double> loss(states);
  for (std::size_t x = 0; x < states; ++x)
    loss[x] = -J * cyclic_bond_sum(static_cast<std::uint32_t>(x), n);
  return run_rg(LossTable(std::move(loss)), TransformChain(std::move(steps)), s, lambda);
}

// Regularized upper incomplete gamma Q(a, x) by series / continued
// fraction, for chi-square tail probabilities.
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw schema_error("gamma_q domain violation");
  if (x == 0.0) return 1.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    // P(a,x) series, Q = 1 - P.
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    const double p = sum * std::exp(-x + a * std::log(x) - lg);
    return std::max(0.0, 1.0 - p);
  }
  // Lentz continued fraction for Q.
  double b = x + 1.0 - a;
  double c = 1.0 / 1e-300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - lg) * h;
}

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

// Pearson goodness of fit with deterministic in-order bin pooling so every
// pooled cell has expected count >= 5.
inline ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& observed,
                                      const std::vector<double>& expected_probs,
                                      std::uint64_t total) {
  if (observed.size() != expected_probs.size())
    throw schema_error("chi_square_gof: size mismatch");
  std::vector<double> exp_pooled;
  std::vector<double> obs_pooled;
  double ecur = 0.0, ocur = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ecur += expected_probs[i] * static_cast<double>(total);
    ocur += static_cast<double>(observed[i]);
    if (ecur >= 5.0) {
      exp_pooled.push_back(ecur);
      obs_pooled.push_back(ocur);
      ecur = ocur = 0.0;
    }
  }
  if (ecur > 0.0 || ocur > 0.0) {
    if (!exp_pooled.empty()) {
      exp_pooled.back() += ecur;
      obs_pooled.back() += ocur;
    } else {
      exp_pooled.push_back(ecur);
      obs_pooled.push_back(ocur);
    }
  }
  ChiSquareResult r;
  if (exp_pooled.size() < 2) {
    r.dof = 0;
    r.p_value = 1.0;
    return r;
  }
  for (std::size_t i = 0; i < exp_pooled.size(); ++i) {
    const double diff = obs_pooled[i] - exp_pooled[i];
    r.statistic += diff * diff / exp_pooled[i];
  }
  r.dof = exp_pooled.size() - 1;
  r.p_value = gamma_q(0.5 * static_cast<double>(r.dof), 0.5 * r.statistic);
  return r;
}

// Kolmogorov-Smirnov statistic of samples against a cdf.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  if (samples.empty()) throw schema_error("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// Critical value at significance alpha for the two-sided KS test.
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace hime::oracle
