#include <cmath>
#include <doctest.h>

#include <vector>

#include "hime/escort.hpp"
#include "hime/oracle.hpp"
#include "hime/rg.hpp"
#include "hime/rng.hpp"

using namespace hime;

namespace {

TabularDistribution random_dist(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.gamma(1.0);
  return TabularDistribution::from_weights(w);
}

LossTable random_loss(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform_range(-2.0, 2.0);
  return LossTable(std::move(v));
}

TransformChain pair_chain(std::size_t fine, std::size_t levels) {
  std::vector<TransformStep> steps;
  std::size_t cur = fine;
  for (std::size_t i = 1; i < levels; ++i) {
    steps.push_back(TransformStep::adjacent_pair_sum(cur));
    cur /= 2;
  }
  return TransformChain(std::move(steps));
}

}  // namespace

TEST_SUITE("rg") {

TEST_CASE("depth-1 solve is a plain escorted Gibbs family") {
  // Two outcomes with losses (0, 1): at lambda = log 3 the finest law is
  // (0.75, 0.25) and log Z = log(1 + e^-lambda).
  LossTable L({0.0, 1.0});
  auto chain = TransformChain::trivial(2);
  SigmaSchedule s({1.0});
  const double lambda = std::log(3.0);
  auto rep = run_rg(L, chain, s, lambda);
  CHECK(rep.level_dists.size() == 1);
  CHECK(rep.level_dists[0].p(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(rep.level_dists[0].p(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(log_partition(rep) ==
        doctest::Approx(std::log(1.0 + std::exp(-lambda))).epsilon(1e-12));
  CHECK(rep.expected_loss == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rep.joint.has_value());
}

TEST_CASE("lambda = 0 gives uniform laws at every level") {
  Rng rng(11, 0);
  auto L = random_loss(rng, 8);
  auto chain = pair_chain(8, 3);
  SigmaSchedule s({1.0, 0.7, 1.3});
  auto rep = run_rg(L, chain, s, 0.0);
  REQUIRE(rep.level_dists.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& d = rep.level_dists[i];
    for (std::size_t x = 0; x < d.n(); ++x)
      CHECK(d.p(x) == doctest::Approx(1.0 / static_cast<double>(d.n())).epsilon(1e-12));
  }
  // At lambda = 0 the weighted log-normalizers telescope to
  // sum_i sigma_i log|level i|.
  double expect = 0.0;
  std::size_t size = 8;
  for (std::size_t i = 1; i <= 3; ++i) {
    expect += s.sigma(i) * std::log(static_cast<double>(size));
    size /= 2;
  }
  CHECK(log_partition(rep) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("variational identity holds for random distributions") {
  // H_{(sigma,T)}(P) - lambda E_P[L] == log Z - D_{(sigma,T)}(P||joint).
  Rng rng(21, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t levels = 2 + static_cast<std::size_t>(rng.uniform_below(3));
    const std::size_t fine = std::size_t{1} << (levels + 1);
    auto chain = pair_chain(fine, levels);
    std::vector<double> sig(levels);
    for (auto& v : sig) v = rng.uniform_range(0.3, 2.0);
    SigmaSchedule s(sig);
    auto L = random_loss(rng, fine);
    const double lambda = rng.uniform_range(-1.5, 1.5);
    auto rep = run_rg(L, chain, s, lambda);
    for (int k = 0; k < 10; ++k) {
      auto P = random_dist(rng, fine);
      CHECK(verify_variational_identity(P, rep, L, chain, s) <= 1e-9);
    }
    // The joint itself satisfies it with zero divergence.
    CHECK(verify_variational_identity(*rep.joint, rep, L, chain, s) <= 1e-9);
  }
}

TEST_CASE("relative identity holds against reference measures") {
  // D_{(sigma,T)}(P||Q) + lambda E_P[L] == D_{(sigma,T)}(P||joint) - log Z
  // for the reference-measure cascade solved against base Q.
  Rng rng(22, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t levels = 2 + static_cast<std::size_t>(rng.uniform_below(2));
    const std::size_t fine = std::size_t{1} << (levels + 1);
    auto chain = pair_chain(fine, levels);
    std::vector<double> sig(levels);
    for (auto& v : sig) v = rng.uniform_range(0.4, 1.8);
    SigmaSchedule s(sig);
    auto L = random_loss(rng, fine);
    auto Q = random_dist(rng, fine);
    const double lambda = rng.uniform_range(-1.0, 1.5);
    auto rep = run_generalized_rg(L, chain, s, lambda, Q);
    for (int k = 0; k < 5; ++k) {
      auto P = random_dist(rng, fine);
      CHECK(verify_relative_identity(P, rep, L, chain, s, Q) <= 1e-9);
    }
  }
}

TEST_CASE("solver laws maximize the hierarchical objective") {
  // Mirror-ascent oracle on the same objective lands on the same value and
  // nearly the same law.
  Rng rng(23, 0);
  for (int trial = 0; trial < 6; ++trial) {
    auto chain = pair_chain(8, 3);
    SigmaSchedule s({rng.uniform_range(0.5, 1.5), rng.uniform_range(0.5, 1.5),
                     rng.uniform_range(0.5, 1.5)});
    auto L = random_loss(rng, 8);
    const double lambda = rng.uniform_range(-1.0, 1.0);
    auto rep = run_rg(L, chain, s, lambda);
    auto oracle_out = oracle::projected_ascent_maxent(L, chain, s, lambda, 60000, 0.25);
    REQUIRE(oracle_out.converged);
    const double f_solver =
        hierarchical_entropy(*rep.joint, chain, s) - lambda * rep.expected_loss;
    double e_oracle = 0.0;
    for (std::size_t x = 0; x < 8; ++x) e_oracle += oracle_out.dist.p(x) * L[x];
    const double f_oracle =
        hierarchical_entropy(oracle_out.dist, chain, s) - lambda * e_oracle;
    CHECK(f_solver >= f_oracle - 1e-7);
    CHECK(std::fabs(f_solver - f_oracle) <= 1e-6);
    CHECK(total_variation(*rep.joint, oracle_out.dist) <= 1e-3);
  }
}

TEST_CASE("log partition derivative equals minus the expected loss") {
  Rng rng(24, 0);
  auto chain = pair_chain(16, 3);
  SigmaSchedule s({1.0, 0.8, 1.4});
  auto L = random_loss(rng, 16);
  const double lambda = 0.6;
  auto f = [&](double lam) { return log_partition(run_rg(L, chain, s, lam)); };
  auto rep = run_rg(L, chain, s, lambda);
  CHECK(oracle::finite_diff(f, lambda, 1e-5) ==
        doctest::Approx(-rep.expected_loss).epsilon(1e-6));
}

TEST_CASE("solve_lambda hits the loss constraint") {
  LossTable L({0.0, 1.0});
  auto chain = TransformChain::trivial(2);
  SigmaSchedule s({1.0});
  SUBCASE("interior target") {
    auto [lam, rep] = solve_lambda(L, chain, s, 0.25, 1e-10);
    CHECK(lam == doctest::Approx(std::log(3.0)).epsilon(1e-8));
    CHECK(rep.expected_loss == doctest::Approx(0.25).epsilon(1e-9));
    CHECK_FALSE(rep.non_monotone);
  }
  SUBCASE("midpoint target solves at lambda = 0") {
    auto [lam, rep] = solve_lambda(L, chain, s, 0.5, 1e-10);
    CHECK(std::fabs(lam) <= 1e-8);
    CHECK(rep.expected_loss == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("infeasible targets throw") {
    CHECK_THROWS_AS(solve_lambda(L, chain, s, 1.5, 1e-10), infeasible_error);
    CHECK_THROWS_AS(solve_lambda(L, chain, s, -0.25, 1e-10), infeasible_error);
  }
}

TEST_CASE("solve_lambda on a hierarchical problem matches its own report") {
  Rng rng(25, 0);
  auto chain = pair_chain(16, 3);
  SigmaSchedule s({1.2, 0.6, 1.0});
  auto L = random_loss(rng, 16);
  const double mu = -0.35;
  auto [lam, rep] = solve_lambda(L, chain, s, mu, 1e-9);
  CHECK(rep.expected_loss == doctest::Approx(mu).epsilon(1e-7));
  auto redo = run_rg(L, chain, s, lam);
  CHECK(redo.expected_loss == doctest::Approx(rep.expected_loss).epsilon(1e-12));
}

TEST_CASE("uniform base reduces the reference-measure run to the plain one") {
  // On balanced chains the uniform base is its own pushforward cascade and
  // the geometric interpolation collapses to the plain escort.
  Rng rng(26, 0);
  auto chain = pair_chain(16, 3);
  SigmaSchedule s({0.9, 1.1, 0.7});
  auto L = random_loss(rng, 16);
  const double lambda = 0.8;
  auto plain = run_rg(L, chain, s, lambda);
  auto rel = run_generalized_rg(L, chain, s, lambda, TabularDistribution::uniform(16));
  REQUIRE(rel.level_dists.size() == plain.level_dists.size());
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(total_variation(rel.level_dists[i], plain.level_dists[i]) <= 1e-12);
}

TEST_CASE("reference-measure run at lambda = 0 returns the base cascade") {
  // With no tilt every level law is the geometric mixture of the base's own
  // pushforward with itself: the base cascade is a fixed point.
  Rng rng(27, 0);
  auto chain = pair_chain(8, 3);
  SigmaSchedule s({1.0, 0.6, 1.7});
  auto base = random_dist(rng, 8);
  auto base_levels = level_marginals(base, chain);
  auto L = random_loss(rng, 8);
  auto rep = run_generalized_rg(L, chain, s, 0.0, base);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(total_variation(rep.level_dists[i], base_levels[i]) <= 1e-12);
}

TEST_CASE("lazy and materialized paths agree") {
  Rng rng(28, 0);
  auto chain = pair_chain(32, 4);
  SigmaSchedule s({1.0, 0.9, 1.1, 0.8});
  auto L = random_loss(rng, 32);
  const double lambda = 0.7;
  RgOptions lazy;
  lazy.materialize_cap = 8;  // force the lazy path
  auto a = run_rg(L, chain, s, lambda);
  auto b = run_rg(L, chain, s, lambda, lazy);
  REQUIRE(a.joint.has_value());
  CHECK_FALSE(b.joint.has_value());
  CHECK(b.expected_loss == doctest::Approx(a.expected_loss).epsilon(1e-13));
  CHECK(log_partition(b) == doctest::Approx(log_partition(a)).epsilon(1e-13));
  REQUIRE(a.entropy_vector.size() == b.entropy_vector.size());
  for (std::size_t i = 0; i < a.entropy_vector.size(); ++i)
    CHECK(b.entropy_vector[i] == doctest::Approx(a.entropy_vector[i]).epsilon(1e-12));
}

TEST_CASE("identity checks demand a materialized joint") {
  Rng rng(29, 0);
  auto chain = pair_chain(8, 2);
  SigmaSchedule s({1.0, 1.0});
  auto L = random_loss(rng, 8);
  RgOptions lazy;
  lazy.materialize_cap = 2;
  auto rep = run_rg(L, chain, s, 0.5, lazy);
  auto P = random_dist(rng, 8);
  CHECK_THROWS_AS(verify_variational_identity(P, rep, L, chain, s), schema_error);
}

TEST_CASE("pareto sweep is deterministic and dominance-filtered") {
  Rng rng(30, 0);
  auto chain = pair_chain(8, 2);
  auto L = random_loss(rng, 8);
  std::vector<SigmaSchedule> grid;
  for (double a : {0.5, 1.0, 1.5})
    for (double b : {0.5, 1.0, 1.5}) grid.push_back(SigmaSchedule({a, b}));
  auto pts1 = pareto_sweep(L, chain, -0.3, grid, 1e-8);
  auto pts2 = pareto_sweep(L, chain, -0.3, grid, 1e-8);
  REQUIRE(!pts1.empty());
  REQUIRE(pts1.size() == pts2.size());
  for (std::size_t i = 0; i < pts1.size(); ++i) {
    CHECK(pts1[i].lambda == pts2[i].lambda);  // bitwise reproducible
    for (std::size_t j = 0; j < pts1[i].entropy_vector.size(); ++j)
      CHECK(pts1[i].entropy_vector[j] == pts2[i].entropy_vector[j]);
  }
  // No surviving point weakly dominates another with a strict improvement.
  for (std::size_t a = 0; a < pts1.size(); ++a)
    for (std::size_t b = 0; b < pts1.size(); ++b) {
      if (a == b) continue;
      bool all_ge = true, some_gt = false;
      for (std::size_t j = 0; j < pts1[a].entropy_vector.size(); ++j) {
        if (pts1[a].entropy_vector[j] < pts1[b].entropy_vector[j] - 1e-12) all_ge = false;
        if (pts1[a].entropy_vector[j] > pts1[b].entropy_vector[j] + 1e-9) some_gt = true;
      }
      CHECK_FALSE((all_ge && some_gt));
    }
}

TEST_CASE("scaling every sigma leaves the laws invariant when lambda scales too") {
  // The maximizing family depends on (sigma, lambda) only through
  // lambda/sigma ratios, so a common rescaling is absorbed.
  Rng rng(31, 0);
  auto chain = pair_chain(8, 3);
  auto L = random_loss(rng, 8);
  SigmaSchedule s1({0.8, 1.2, 0.6});
  SigmaSchedule s2 = s1.scaled(3.0);
  auto a = run_rg(L, chain, s1, 0.9);
  auto b = run_rg(L, chain, s2, 0.9 * 3.0);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(total_variation(a.level_dists[i], b.level_dists[i]) <= 1e-12);
  CHECK(log_partition(b) == doctest::Approx(3.0 * log_partition(a)).epsilon(1e-10));
}

}  // TEST_SUITE
