// Closed-form hierarchy for nearest-neighbor spin losses on the periodic
// chain. Decimating the odd-position spins of a nearest-neighbor Gibbs law
// yields another nearest-neighbor law on the kept spins with coupling
// (1/2) log cosh(2 theta), times a constant (2 cosh^{1/2}(2 theta))^{N/2};
// the escort stage scales the coupling by the accumulated-weight ratio.
// Everything downstream (normalizers, sampling, constraint solving) runs on
// the resulting (n_i, theta_i) ladder in closed form.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hime/common.hpp"
#include "hime/oracle.hpp"
#include "hime/rng.hpp"
#include "hime/sigma.hpp"

namespace hime::ising {

// One level of the ladder: n spins on a cycle with coupling theta (nats per
// bond). n stays a power of two >= 4 so the cyclic bond sum never
// degenerates (a 2-cycle would count its single bond twice).
struct IsingChain {
  std::size_t n = 0;
  double theta = 0.0;
};

struct IsingFlow {
  std::vector<IsingChain> levels;
  std::vector<double> sigma;  // schedule the ladder was built with
  // Set when a coupling was clamped to +-700 to avoid infinities; the
  // clamped ladder is still usable (tanh is saturated far earlier).
  bool theta_capped = false;
};

// Decimation image of the coupling. log cosh runs in log-space, so
// |theta| > 350 does not overflow.
inline double theta_step(double theta, double ratio) {
  if (!(ratio > 0.0) || ratio > 1.0)
    throw schema_error("theta_step ratio must lie in (0, 1]");
  return 0.5 * ratio * log_cosh(2.0 * theta);
}

inline IsingFlow ising_flow(double J, double lambda, const SigmaSchedule& s,
                            std::size_t n, std::size_t levels) {
  if (!(J > 0.0) || !std::isfinite(J)) throw schema_error("J must be a positive real");
  if (!std::isfinite(lambda)) throw schema_error("lambda must be finite");
  if (levels < 1) throw schema_error("flow needs at least one level");
  if (s.depth() != levels) throw schema_error("sigma depth != levels");
  if (n < 4 || (n & (n - 1)) != 0)
    throw schema_error("spin count must be a power of two >= 4");
  if (n >> (levels - 1) < 4)
    throw schema_error("coarsest level would drop below 4 spins");

  IsingFlow flow;
  flow.sigma = s.values();
  double theta = lambda * J / s.sigma(1);
  if (std::fabs(theta) > 700.0) {
    theta = theta > 0.0 ? 700.0 : -700.0;
    flow.theta_capped = true;
  }
  flow.levels.push_back(IsingChain{n, theta});
  for (std::size_t i = 1; i < levels; ++i) {
    double next = theta_step(flow.levels.back().theta, s.ratio(i));
    if (std::fabs(next) > 700.0) {
      next = next > 0.0 ? 700.0 : -700.0;
      flow.theta_capped = true;
    }
    flow.levels.push_back(IsingChain{flow.levels.back().n / 2, next});
  }
  return flow;
}

// log[(2 cosh theta)^n + (2 sinh theta)^n] via the transfer-matrix
// eigenvalues, stably: n(log 2 + log cosh theta) + log1p(tanh^n theta).
inline double transfer_log_partition(std::size_t n, double theta) {
  if (n < 3) throw schema_error("cyclic chain needs at least 3 spins");
  const double nn = static_cast<double>(n);
  const double t = std::tanh(theta);
  return nn * (std::log(2.0) + log_cosh(theta)) +
         std::log1p(std::pow(t, static_cast<double>(n)));
}

// d/dtheta of transfer_log_partition: the Gibbs expectation of the cyclic
// bond sum, n (tanh + tanh^{n-1}) / (1 + tanh^n).
inline double cyclic_energy_expectation(std::size_t n, double theta) {
  if (n < 3) throw schema_error("cyclic chain needs at least 3 spins");
  const double nn = static_cast<double>(n);
  const double t = std::tanh(theta);
  const double tn1 = std::pow(t, static_cast<double>(n - 1));
  return nn * (t + tn1) / (1.0 + tn1 * t);
}

// Accumulated-weight contributions sigma_bar_i * log Z_i of each level's
// normalizer: Z_1 is the transfer partition of the finest chain, and each
// coarser Z_{i+1} combines the decimation constant, the escort exponent,
// and the halved chain's partition. The sum equals the hierarchical
// log-partition of the exact tabular solver on the enumerated table.
inline std::vector<double> ising_level_log_normalizers(const IsingFlow& flow,
                                                       std::size_t n) {
  if (flow.levels.empty() || flow.levels.size() != flow.sigma.size())
    throw schema_error("malformed flow");
  if (flow.levels.front().n != n)
    throw schema_error("flow finest size != n");
  const SigmaSchedule s(flow.sigma);
  std::vector<double> out(flow.levels.size());
  out[0] = s.sigma_bar(1) * transfer_log_partition(n, flow.levels[0].theta);
  for (std::size_t i = 1; i < flow.levels.size(); ++i) {
    const std::size_t ni = flow.levels[i - 1].n;
    const double theta = flow.levels[i - 1].theta;
    const double t = s.ratio(i);
    // Decimation constant per kept configuration: (2 cosh^{1/2}(2 theta))^{ni/2}.
    const double log_c =
        0.5 * static_cast<double>(ni) * (std::log(2.0) + 0.5 * log_cosh(2.0 * theta));
    const double raw = t * (log_c - transfer_log_partition(ni, theta)) +
                       transfer_log_partition(ni / 2, flow.levels[i].theta);
    out[i] = s.sigma_bar(i + 1) * raw;
  }
  return out;
}

inline std::vector<int> unpack_spins(std::uint64_t config, std::size_t n) {
  std::vector<int> s(n);
  for (std::size_t j = 0; j < n; ++j) s[j] = (config >> j) & 1u ? 1 : -1;
  return s;
}

inline std::uint64_t pack_spins(const std::vector<int>& spins) {
  if (spins.size() > 64) throw schema_error("cannot pack more than 64 spins");
  std::uint64_t c = 0;
  for (std::size_t j = 0; j < spins.size(); ++j) {
    if (spins[j] != 1 && spins[j] != -1)
      throw schema_error("spins must be +1 or -1");
    if (spins[j] == 1) c |= std::uint64_t{1} << j;
  }
  return c;
}

// Rejection-free ancestral sampler: the coarsest chain is drawn exactly
// from its enumerated table, and each finer level inserts the decimated
// odd-position spins independently with P(+1 | neighbors) =
// e^{theta s} / (2 cosh(theta s)), s the sum of the two kept neighbors,
// using the FINER level's theta. Deterministic per (seed, index).
inline std::vector<std::vector<int>> hierarchical_sample(const IsingFlow& flow,
                                                         std::uint64_t seed,
                                                         std::size_t count) {
  if (flow.levels.empty()) throw schema_error("malformed flow");
  const std::size_t n_top = flow.levels.back().n;
  if (n_top > 20)
    throw schema_error("coarsest level too large to enumerate; add levels");
  const double theta_top = flow.levels.back().theta;
  const std::size_t states = std::size_t{1} << n_top;
  std::vector<double> logits(states);
  for (std::size_t c = 0; c < states; ++c)
    logits[c] =
        theta_top * oracle::cyclic_bond_sum(static_cast<std::uint32_t>(c), n_top);
  const double lse = log_sum_exp(logits);
  std::vector<double> cdf(states);
  double acc = 0.0;
  for (std::size_t c = 0; c < states; ++c) {
    acc += std::exp(logits[c] - lse);
    cdf[c] = acc;
  }
  cdf.back() = 1.0;

  std::vector<std::vector<int>> out;
  out.reserve(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Rng rng(seed, idx);
    const double u = rng.uniform();
    const std::size_t pick = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    std::vector<int> spins = unpack_spins(pick, n_top);
    for (std::size_t li = flow.levels.size() - 1; li-- > 0;) {
      const std::size_t nf = flow.levels[li].n;
      const double theta = flow.levels[li].theta;
      std::vector<int> fine(nf);
      for (std::size_t j = 0; j < nf; j += 2) fine[j] = spins[j / 2];
      for (std::size_t j = 1; j < nf; j += 2) {
        const int left = fine[j - 1];
        const int right = fine[(j + 1) % nf];
        const int ssum = left + right;
        // P(+1 | ssum) = 1 / (1 + e^{-2 theta ssum})
        const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * theta * ssum));
        fine[j] = rng.uniform() < p_plus ? 1 : -1;
      }
      spins.swap(fine);
    }
    out.push_back(std::move(spins));
  }
  return out;
}

// Expected nearest-neighbor loss E[-J sum_cyc x x'] under the cascade,
// via the analytic lambda-derivative of the weighted normalizer sum
// (envelope identity). Matrix- and table-free; used for spin counts too
// large to enumerate.
inline double ising_expected_loss(double J, double lambda, const SigmaSchedule& s,
                                  std::size_t n, std::size_t levels) {
  const IsingFlow flow = ising_flow(J, lambda, s, n, levels);
  // d theta_1 / d lambda; zero once the +-700 cap froze theta_1.
  double dtheta = std::fabs(lambda * J / s.sigma(1)) > 700.0 ? 0.0 : J / s.sigma(1);
  double dG = s.sigma_bar(1) *
              cyclic_energy_expectation(n, flow.levels[0].theta) * dtheta;
  for (std::size_t i = 1; i < levels; ++i) {
    const std::size_t ni = flow.levels[i - 1].n;
    const double theta = flow.levels[i - 1].theta;
    const double t = s.ratio(i);
    const double tanh2 = std::tanh(2.0 * theta);
    const double dtheta_next = t * tanh2 * dtheta;
    const double e_fine = cyclic_energy_expectation(ni, theta);
    const double e_coarse = cyclic_energy_expectation(ni / 2, flow.levels[i].theta);
    const double draw = t * (0.5 * static_cast<double>(ni) * tanh2 - e_fine) * dtheta +
                        e_coarse * dtheta_next;
    dG += s.sigma_bar(i + 1) * draw;
    dtheta = dtheta_next;
  }
  return -dG;
}

// Root-finds E[L] = mu over lambda. For J > 0 the reachable loss means are
// (-J n, 0); the mean is evaluated through the enumerated table when the
// chain fits in 16 spins and through the analytic derivative otherwise.
inline double solve_lambda_ising(double J, const SigmaSchedule& s, double mu,
                                 std::size_t n, std::size_t levels, double tol) {
  if (!(tol > 0.0)) throw schema_error("solve tolerance must be positive");
  if (!(J > 0.0) || !std::isfinite(J)) throw schema_error("J must be a positive real");
  if (!std::isfinite(mu)) throw schema_error("mu must be finite");
  if (!(mu < 0.0) || !(mu > -J * static_cast<double>(n)))
    throw infeasible_error("mu must lie in (-J n, 0) for a ferromagnetic chain");

  const auto mean_loss = [&](double lambda) {
    if (n <= 16) {
      return oracle::enumerate_rg_ising(n, J, lambda, s, levels).expected_loss;
    }
    return ising_expected_loss(J, lambda, s, n, levels);
  };

  // E[L] decreases from 0 (lambda = 0) toward -J n; the root is positive.
  double lo = 0.0;
  double glo = 0.0 - mu;  // mean at lambda = 0 is exactly 0
  if (std::fabs(glo) <= tol) return lo;
  double hi = 1.0;
  double ghi = mean_loss(hi) - mu;
  constexpr double kLambdaLimit = 1e6;
  while (ghi > 0.0) {
    hi *= 2.0;
    if (hi > kLambdaLimit)
      throw infeasible_error("constraint mean unreachable: lambda exceeded 1e6");
    ghi = mean_loss(hi) - mu;
  }
  if (std::fabs(ghi) <= tol) return hi;
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double gm = mean_loss(mid) - mu;
    if (std::fabs(gm) <= tol) return mid;
    if (gm > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  throw numeric_error("constraint bisection failed to reach tolerance");
}

}  // namespace hime::ising
