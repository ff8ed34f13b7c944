// Closed-form hierarchy for centered Gaussians whose precision has the
// fully coupled block-modular shape T_m[A, B]: A on the diagonal and the
// same B in every below-diagonal block. Dropping the last block sends
// T_m[A, B] to T_{m-1}[A', B'] with (A', B') a single Schur complement
// step, and the escort stage only rescales the front coefficient, so the
// whole cascade stays inside the family.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "hime/common.hpp"
#include "hime/rng.hpp"
#include "hime/sigma.hpp"

namespace hime::gaussian {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Fully coupled block matrix: A on the diagonal, B strictly below, B^T
// strictly above.
inline Matrix assemble(const Matrix& A, const Matrix& B, std::size_t m) {
  const std::size_t k = static_cast<std::size_t>(A.rows());
  Matrix T(m * k, m * k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j)
        T.block(i * k, j * k, k, k) = A;
      else if (i > j)
        T.block(i * k, j * k, k, k) = B;
      else
        T.block(i * k, j * k, k, k) = B.transpose();
    }
  return T;
}

inline double log_det_llt(const Matrix& M, const char* what) {
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw numeric_error(std::string(what) + ": factorization failed (matrix not positive definite)");
  return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

struct SchurResult {
  Matrix A;
  Matrix B;
};

// One marginalization step: A' = A - B^T A^{-1} B, B' = B - B^T A^{-1} B.
inline SchurResult schur_step(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw schema_error("schur_step: blocks must be square and same size");
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success)
    throw numeric_error("schur_step: diagonal block not positive definite");
  const Matrix X = llt.solve(B);            // A^{-1} B
  const Matrix BtX = B.transpose() * X;     // B^T A^{-1} B
  Matrix Ap = A - BtX;
  Ap = 0.5 * (Ap + Matrix(Ap.transpose()));  // kill symmetric drift
  return SchurResult{std::move(Ap), B - BtX};
}

// Centered family with density proportional to exp(-coeff x^T T_m[A,B] x).
struct ModularGaussian {
  std::size_t k = 0;
  std::size_t m = 0;
  Matrix A;
  Matrix B;
  double coeff = 1.0;

  ModularGaussian() = default;

  // check_pd = false skips the (possibly large) definiteness factorization;
  // flow-internal levels are marginals of a checked matrix, hence definite
  // by construction.
  ModularGaussian(std::size_t k_, std::size_t m_, Matrix A_, Matrix B_, double coeff_,
                  bool check_pd = true, const Vector& linear = Vector())
      : k(k_), m(m_), A(std::move(A_)), B(std::move(B_)), coeff(coeff_) {
    if (k == 0 || m == 0) throw schema_error("ModularGaussian: k and m must be positive");
    if (A.rows() != static_cast<Eigen::Index>(k) || A.cols() != static_cast<Eigen::Index>(k) ||
        B.rows() != static_cast<Eigen::Index>(k) || B.cols() != static_cast<Eigen::Index>(k))
      throw schema_error("ModularGaussian: A and B must be k x k");
    if (!A.allFinite() || !B.allFinite() || !std::isfinite(coeff))
      throw schema_error("ModularGaussian: entries must be finite");
    if (coeff <= 0.0) throw schema_error("ModularGaussian: coeff must be positive");
    if ((A - Matrix(A.transpose())).cwiseAbs().maxCoeff() > 1e-12)
      throw schema_error("ModularGaussian: A must be symmetric");
    if (linear.size() != 0 && linear.cwiseAbs().maxCoeff() > 0.0)
      throw schema_error("ModularGaussian: linear terms unsupported, family is centered");
    if (check_pd) verify_definite();
  }

  // Definiteness: direct factorization up to dimension 4096, and the
  // equivalent leading-block criterion (every Schur-iterated diagonal
  // block definite) beyond that.
  void verify_definite() const {
    if (m * k <= 4096) {
      Eigen::LLT<Matrix> llt(assemble(A, B, m));
      if (llt.info() != Eigen::Success)
        throw numeric_error("ModularGaussian: matrix not positive definite");
      return;
    }
    Matrix a = A, b = B;
    for (std::size_t j = 0; j + 1 < m; ++j) {
      auto next = schur_step(a, b);  // throws numeric_error if a is not PD
      a = std::move(next.A);
      b = std::move(next.B);
    }
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
      throw numeric_error("ModularGaussian: matrix not positive definite");
  }
};

struct GaussianFlowReport {
  std::size_t k = 0;
  std::size_t d = 0;
  double lambda = 0.0;
  std::vector<double> sigma;
  std::vector<ModularGaussian> levels;  // levels[i-1] describes level i with m = d-i+1
  std::vector<double> level_logZ;       // raw per-level log-normalizers
};

// Hierarchical log-partition: accumulated-weight combination of the raw
// per-level normalizers, matching the discrete solver's convention.
inline double log_partition(const GaussianFlowReport& rep) {
  SigmaSchedule s(rep.sigma);
  double acc = 0.0;
  for (std::size_t i = 1; i <= rep.level_logZ.size(); ++i)
    acc += s.sigma_bar(i) * rep.level_logZ[i - 1];
  return acc;
}

inline GaussianFlowReport gaussian_flow(const Matrix& A, const Matrix& B, std::size_t k,
                                        std::size_t d, const SigmaSchedule& s,
                                        double lambda) {
  if (s.depth() != d) throw schema_error("gaussian_flow: sigma depth != d");
  if (!(lambda > 0.0)) throw schema_error("gaussian_flow: lambda must be positive");
  // Validates shapes, symmetry, and definiteness of the full matrix.
  ModularGaussian root(k, d, A, B, lambda / s.sigma(1));

  std::vector<Matrix> As{A}, Bs{B};
  for (std::size_t j = 1; j < d; ++j) {
    auto next = schur_step(As.back(), Bs.back());
    As.push_back(std::move(next.A));
    Bs.push_back(std::move(next.B));
  }
  std::vector<double> ld(d);
  for (std::size_t j = 0; j < d; ++j) ld[j] = log_det_llt(As[j], "gaussian_flow");
  // suffix[i] = sum_{j >= i} log det A_j = log det T_{d-i}[A_{i+1}, B_{i+1}]
  std::vector<double> suffix(d + 1, 0.0);
  for (std::size_t j = d; j-- > 0;) suffix[j] = suffix[j + 1] + ld[j];

  GaussianFlowReport rep;
  rep.k = k;
  rep.d = d;
  rep.lambda = lambda;
  rep.sigma = s.values();
  for (std::size_t i = 1; i <= d; ++i)
    rep.levels.emplace_back(k, d - i + 1, As[i - 1], Bs[i - 1], lambda / s.sigma_bar(i),
                            /*check_pd=*/false);
  rep.level_logZ.resize(d);
  const double n1 = static_cast<double>(k * d);
  rep.level_logZ[0] = 0.5 * n1 * std::log(kPi * s.sigma(1) / lambda) - 0.5 * suffix[0];
  for (std::size_t i = 1; i < d; ++i) {
    const double t = s.ratio(i);
    const double n = static_cast<double>(k * (d - i));
    const double log_c = std::log(lambda / s.sigma_bar(i));
    rep.level_logZ[i] = 0.5 * n * (1.0 - t) * std::log(kPi) - 0.5 * n * std::log(t) +
                        0.5 * (t - 1.0) * (n * log_c + suffix[i]);
  }
  return rep;
}

// d/dlambda of the raw normalizer sum: -(1/lambda) sum_{i=0}^{d-1}
// k (d-i) sigma_{i+1} / (2 sigma_bar_{i+1}). Matrix-free.
inline double gaussian_raw_log_partition_derivative(std::size_t k, std::size_t d,
                                                    const SigmaSchedule& s,
                                                    double lambda) {
  if (s.depth() != d) throw schema_error("sigma depth != d");
  if (!(lambda > 0.0)) throw schema_error("lambda must be positive");
  double c = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    c += static_cast<double>(k * (d - i)) * s.sigma(i + 1) / (2.0 * s.sigma_bar(i + 1));
  return -c / lambda;
}

// Stationary point of the raw normalizer sum against a loss budget mu:
// the closed form (1/mu) sum_i k (d-i) sigma_{i+1} / (2 sigma_bar_{i+1}).
inline double gaussian_lambda_star(std::size_t k, std::size_t d, const SigmaSchedule& s,
                                   double mu) {
  if (s.depth() != d) throw schema_error("sigma depth != d");
  if (!(mu > 0.0))
    throw infeasible_error("quadratic loss expectation is positive; mu must be > 0");
  double c = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    c += static_cast<double>(k * (d - i)) * s.sigma(i + 1) / (2.0 * s.sigma_bar(i + 1));
  return c / mu;
}

// True expectation of x^T T_d[A,B] x under the composed hierarchical law:
// (1/(2 lambda)) sum_{i=0}^{d-1} k (d-i) sigma_{i+1}. Independent of A, B
// by the generalized equipartition of the cascade.
inline double gaussian_expected_loss(std::size_t k, std::size_t d, const SigmaSchedule& s,
                                     double lambda) {
  if (s.depth() != d) throw schema_error("sigma depth != d");
  if (!(lambda > 0.0)) throw schema_error("lambda must be positive");
  double c = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    c += static_cast<double>(k * (d - i)) * s.sigma(i + 1);
  return 0.5 * c / lambda;
}

// Multiplier that makes the sampled quadratic form meet E[L] = mu.
inline double gaussian_constraint_lambda(std::size_t k, std::size_t d,
                                         const SigmaSchedule& s, double mu) {
  if (s.depth() != d) throw schema_error("sigma depth != d");
  if (!(mu > 0.0))
    throw infeasible_error("quadratic loss expectation is positive; mu must be > 0");
  double c = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    c += static_cast<double>(k * (d - i)) * s.sigma(i + 1);
  return 0.5 * c / mu;
}

// Top-down ancestral sampler. The coarsest block is drawn from precision
// 2 coeff_d A_d; descending to level i appends that level's last block,
// whose conditional given the already drawn blocks u has precision
// 2 coeff_i A_i and mean -A_i^{-1} B_i (sum of u blocks). Outputs are
// finest-level vectors with blocks in natural order.
inline std::vector<Vector> gaussian_hierarchical_sample(const GaussianFlowReport& rep,
                                                        std::uint64_t seed,
                                                        std::size_t count) {
  const std::size_t d = rep.d, k = rep.k;
  if (d == 0 || rep.levels.size() != d) throw schema_error("sample: malformed report");
  // Per-level Cholesky factors of the conditional precisions and the mean
  // maps A_i^{-1} B_i.
  std::vector<Matrix> chol_u(d), mean_map(d);
  for (std::size_t i = 1; i <= d; ++i) {
    const ModularGaussian& g = rep.levels[i - 1];
    Eigen::LLT<Matrix> prec((2.0 * g.coeff) * g.A);
    if (prec.info() != Eigen::Success)
      throw numeric_error("sample: conditional precision not positive definite");
    chol_u[i - 1] = prec.matrixU();
    Eigen::LLT<Matrix> allt(g.A);
    if (allt.info() != Eigen::Success)
      throw numeric_error("sample: level block not positive definite");
    mean_map[i - 1] = allt.solve(g.B);
  }
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Rng rng(seed, idx);
    Vector x(k * d);
    Vector z(k);
    // coarsest level d contributes block 0
    for (std::size_t j = 0; j < k; ++j) z[j] = rng.normal();
    x.segment(0, k) =
        chol_u[d - 1].template triangularView<Eigen::Upper>().solve(z);
    Vector run = x.segment(0, k);
    for (std::size_t i = d - 1; i >= 1; --i) {
      // level i appends fine block d - i
      const std::size_t b = d - i;
      for (std::size_t j = 0; j < k; ++j) z[j] = rng.normal();
      Vector dev = chol_u[i - 1].template triangularView<Eigen::Upper>().solve(z);
      x.segment(b * k, k) = -(mean_map[i - 1] * run) + dev;
      run += x.segment(b * k, k);
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace hime::gaussian
