#include <doctest.h>

#include <cmath>
#include <vector>

#include "hime/escort.hpp"
#include "hime/rng.hpp"
#include "hime/tabular.hpp"

using namespace hime;

namespace {
TabularDistribution random_dist(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.gamma(1.0);
  return TabularDistribution::from_weights(std::move(w));
}
}  // namespace

TEST_SUITE_BEGIN("escort");

TEST_CASE("escort frozen examples") {
  TabularDistribution p({0.8, 0.2});
  auto r1 = escort(p, 1.0);
  CHECK(r1.z == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r1.dist.p(0) == doctest::Approx(0.8).epsilon(1e-14));

  auto ru = escort(TabularDistribution::uniform(4), 0.5);
  CHECK(ru.z == doctest::Approx(2.0).epsilon(1e-12));
  for (std::size_t x = 0; x < 4; ++x)
    CHECK(ru.dist.p(x) == doctest::Approx(0.25).epsilon(1e-12));

  auto r = escort(p, 0.5);
  CHECK(r.dist.p(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.dist.p(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.z == doctest::Approx(1.341641).epsilon(1e-6));
  CHECK(r.z == doctest::Approx(std::sqrt(0.8) + std::sqrt(0.2)).epsilon(1e-14));

  CHECK_THROWS_AS(escort(p, 0.0), schema_error);
  CHECK_THROWS_AS(escort(p, -1.0), schema_error);
}

TEST_CASE("escort keeps exact zeros and survives extreme exponents") {
  TabularDistribution p({0.5, 0.5, 0.0});
  auto r = escort(p, 3.0);
  CHECK(r.dist.p(2) == 0.0);
  CHECK(r.dist.p(0) == doctest::Approx(0.5).epsilon(1e-14));

  // Tiny mass under a large exponent: linear-space powers would underflow.
  TabularDistribution q({1e-150, 1.0 - 1e-150});
  auto big = escort(q, 2.0);
  CHECK(big.dist.p(0) > 0.0);
  CHECK(big.dist.p(0) == doctest::Approx(1e-300).epsilon(1e-10));
}

TEST_CASE("escort composition collapses to the product exponent") {
  Rng rng(17, 0);
  for (int t = 0; t < 50; ++t) {
    auto p = random_dist(rng, 6);
    const double a = rng.uniform_range(0.2, 2.0);
    const double b = rng.uniform_range(0.2, 2.0);
    auto lhs = escort(escort(p, a).dist, b).dist;
    auto rhs = escort(p, a * b).dist;
    for (std::size_t x = 0; x < 6; ++x)
      CHECK(std::fabs(lhs.p(x) - rhs.p(x)) <= 1e-12);
  }
}

TEST_CASE("generalized escort frozen examples and endpoints") {
  TabularDistribution p1({0.8, 0.2}), p2({0.2, 0.8});
  auto mid = generalized_escort(p1, p2, 0.5);
  CHECK(mid.dist.p(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.dist.p(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.z == doctest::Approx(0.8).epsilon(1e-12));

  auto at1 = generalized_escort(p1, p2, 1.0);
  CHECK(at1.dist.p(0) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(at1.z == 1.0);
  auto at0 = generalized_escort(p1, p2, 0.0);
  CHECK(at0.dist.p(0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(at0.z == 1.0);

  auto same = generalized_escort(p1, p1, 0.37);
  CHECK(same.z == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(same.dist.p(0) == doctest::Approx(0.8).epsilon(1e-12));

  CHECK_THROWS_AS(generalized_escort(p1, p2, 1.5), schema_error);
  CHECK_THROWS_AS(generalized_escort(p1, TabularDistribution({1.0}), 0.5), schema_error);
}

TEST_CASE("generalized escort flags disjoint supports") {
  TabularDistribution a({1.0, 0.0}), b({0.0, 1.0});
  CHECK_THROWS_AS(generalized_escort(a, b, 0.5), degenerate_support_error);
  // Endpoints dodge the degeneracy by construction.
  CHECK(generalized_escort(a, b, 1.0).dist.p(0) == 1.0);
}

// Scalar free-energy identity: with (Qt, Zt) = escort(Q, theta/(1+theta)),
//   H(P) - theta*D(P||Q) = (1+theta)*log Zt - (1+theta)*D(P||Qt).
// The (1+theta) factor on log Zt is forced: at P=(1,0), Q=(1/2,1/2),
// theta=1 both sides equal -log 2, while a bare log Zt misses by log 2/2.
TEST_CASE("escort free-energy identity") {
  {
    TabularDistribution p({1.0, 0.0}), q({0.5, 0.5});
    const double theta = 1.0;
    auto e = escort(q, theta / (1.0 + theta));
    const double lhs = entropy(p) - theta * kl(p, q);
    const double rhs = (1.0 + theta) * e.log_z - (1.0 + theta) * kl(p, e.dist);
    CHECK(lhs == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
    CHECK(std::fabs(lhs - rhs) <= 1e-12);
  }
  Rng rng(29, 0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.uniform_below(9);
    auto p = random_dist(rng, n);
    auto q = random_dist(rng, n);
    const double theta = rng.uniform_range(0.05, 4.0);
    auto e = escort(q, theta / (1.0 + theta));
    const double lhs = entropy(p) - theta * kl(p, q);
    const double rhs = (1.0 + theta) * e.log_z - (1.0 + theta) * kl(p, e.dist);
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  CHECK(worst <= 1e-10);
}

// theta*D(P||Q1) + (1-theta)*D(P||Q2) = D(P||Qt) - log Zt with
// (Qt, Zt) = generalized_escort(Q1, Q2, theta).
TEST_CASE("tilted divergence identity") {
  Rng rng(41, 0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.uniform_below(9);
    auto p = random_dist(rng, n);
    auto q1 = random_dist(rng, n);
    auto q2 = random_dist(rng, n);
    const double theta = rng.uniform_range(0.0, 1.0);
    auto e = generalized_escort(q1, q2, theta);
    const double lhs = theta * kl(p, q1) + (1.0 - theta) * kl(p, q2);
    const double rhs = kl(p, e.dist) - e.log_z;
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  CHECK(worst <= 1e-10);
}

TEST_SUITE_END();
