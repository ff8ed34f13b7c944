#include <doctest.h>

#include <cmath>
#include <vector>

#include "hime/rng.hpp"
#include "hime/tabular.hpp"

using namespace hime;

namespace {

// Random distribution from independent gamma variates (flat Dirichlet
// when alpha = 1); support is full with probability one.
TabularDistribution random_dist(Rng& rng, std::size_t n, double alpha = 1.0) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.gamma(alpha);
  return TabularDistribution::from_weights(std::move(w));
}

// Random surjection: every codomain element claims one domain slot first.
TransformStep random_step(Rng& rng, std::size_t domain, std::size_t codomain) {
  std::vector<std::size_t> map(domain);
  std::vector<std::size_t> perm(domain);
  for (std::size_t i = 0; i < domain; ++i) perm[i] = i;
  for (std::size_t i = domain; i > 1; --i)
    std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
  for (std::size_t x = 0; x < domain; ++x)
    map[perm[x]] = x < codomain ? x : rng.uniform_below(codomain);
  return TransformStep(domain, codomain, std::move(map));
}

TransformChain random_chain(Rng& rng, std::size_t finest, std::size_t depth) {
  std::vector<TransformStep> steps;
  std::size_t cur = finest;
  for (std::size_t i = 1; i < depth; ++i) {
    const std::size_t lo = 2;
    std::size_t next = lo + rng.uniform_below(std::max<std::size_t>(cur - lo, 1));
    if (next >= cur) next = cur > lo ? cur - 1 : lo;
    steps.push_back(random_step(rng, cur, next));
    cur = next;
  }
  return TransformChain(std::move(steps));
}

}  // namespace

TEST_SUITE_BEGIN("tabular");

TEST_CASE("constructor renormalizes inside tolerance and rejects outside") {
  TabularDistribution p({0.5, 0.5 + 5e-13});
  CHECK(p.p(0) + p.p(1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(TabularDistribution({0.5, 0.6}), schema_error);
  CHECK_THROWS_AS(TabularDistribution({1.5, -0.5}), schema_error);
  CHECK_THROWS_AS(TabularDistribution(std::vector<double>{}), schema_error);
}

TEST_CASE("pushforward: identity, merge, constant map") {
  TabularDistribution p({0.3, 0.7});
  auto id = TransformStep::identity(2);
  auto q = pushforward(p, id);
  CHECK(q.p(0) == doctest::Approx(0.3));
  CHECK(q.p(1) == doctest::Approx(0.7));

  TabularDistribution r({0.3, 0.2, 0.5});
  TransformStep merge(3, 2, {0, 0, 1});
  auto rr = pushforward(r, merge);
  CHECK(rr.p(0) == doctest::Approx(0.5));
  CHECK(rr.p(1) == doctest::Approx(0.5));

  TransformStep constant(3, 1, {0, 0, 0});
  auto one = pushforward(r, constant);
  CHECK(one.p(0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(pushforward(p, merge), schema_error);
}

TEST_CASE("entropy frozen values") {
  CHECK(entropy(TabularDistribution::uniform(4)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(entropy(TabularDistribution::point_mass(5, 2)) == 0.0);
  CHECK(entropy(TabularDistribution({0.5, 0.25, 0.25})) ==
        doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(entropy(TabularDistribution({0.5, 0.25, 0.25})) ==
        doctest::Approx(1.039721).epsilon(1e-6));
}

TEST_CASE("kl frozen values and the absolute-continuity signal") {
  TabularDistribution p({0.75, 0.25}), q({0.5, 0.5});
  CHECK(kl(p, p) == 0.0);
  CHECK(kl(p, q) == doctest::Approx(0.130812).epsilon(1e-5));
  CHECK(kl(p, q) == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5))
                        .epsilon(1e-14));
  const double inf = kl(TabularDistribution({1.0, 0.0}), TabularDistribution({0.0, 1.0}));
  CHECK(is_inf_signal(inf));
  CHECK_THROWS_AS(kl(p, TabularDistribution({1.0, 0.0, 0.0})), schema_error);
}

TEST_CASE("disintegrate frozen examples") {
  TabularDistribution p({0.2, 0.3, 0.5});
  TransformStep step(3, 2, {0, 0, 1});
  auto dis = disintegrate(p, step);
  CHECK(dis.coarse.p(0) == doctest::Approx(0.5));
  CHECK(dis.coarse.p(1) == doctest::Approx(0.5));
  CHECK(dis.conditional.row(0)[0] == doctest::Approx(0.4));
  CHECK(dis.conditional.row(0)[1] == doctest::Approx(0.6));
  CHECK(dis.conditional.row(1)[0] == doctest::Approx(1.0));

  auto merge = TransformStep::adjacent_pair_sum(4);
  auto u = disintegrate(TabularDistribution::uniform(4), merge);
  CHECK(u.coarse.p(0) == doctest::Approx(0.5));
  CHECK(u.conditional.row(1)[0] == doctest::Approx(0.5));

  auto pm = disintegrate(TabularDistribution::point_mass(4, 3), merge);
  CHECK(pm.coarse.p(1) == doctest::Approx(1.0));
  CHECK(pm.conditional.row(1)[0] == doctest::Approx(0.0));
  CHECK(pm.conditional.row(1)[1] == doctest::Approx(1.0));
  // Zero-mass coarse row defaults to uniform over the preimage.
  CHECK(pm.conditional.row(0)[0] == doctest::Approx(0.5));
}

TEST_CASE("compose inverts disintegrate") {
  TransformStep step(3, 2, {0, 0, 1});
  TabularDistribution coarse({0.5, 0.5});
  ConditionalTable cond(step);
  cond.row(0) = {0.4, 0.6};
  cond.row(1) = {1.0};
  auto fine = compose(coarse, cond, step);
  CHECK(fine.p(0) == doctest::Approx(0.2));
  CHECK(fine.p(1) == doctest::Approx(0.3));
  CHECK(fine.p(2) == doctest::Approx(0.5));

  auto sup = compose(TabularDistribution({1.0, 0.0}), cond, step);
  CHECK(sup.p(2) == 0.0);

  Rng rng(31, 0);
  for (int t = 0; t < 50; ++t) {
    auto p = random_dist(rng, 6);
    auto s = random_step(rng, 6, 3);
    auto dis = disintegrate(p, s);
    auto back = compose(dis.coarse, dis.conditional, s);
    for (std::size_t x = 0; x < 6; ++x)
      CHECK(back.p(x) == doctest::Approx(p.p(x)).epsilon(1e-14));
  }
}

TEST_CASE("hierarchical entropy: base case, frozen value, sigma linearity") {
  TabularDistribution p({0.1, 0.2, 0.3, 0.4});
  auto chain1 = TransformChain::trivial(4);
  SigmaSchedule s1({2.0});
  CHECK(hierarchical_entropy(p, chain1, s1) ==
        doctest::Approx(2.0 * entropy(p)).epsilon(1e-14));

  std::vector<TransformStep> steps;
  steps.push_back(TransformStep::adjacent_pair_sum(4));
  TransformChain chain(std::move(steps));
  SigmaSchedule s({1.0, 1.0});
  CHECK(hierarchical_entropy(TabularDistribution::uniform(4), chain, s) ==
        doctest::Approx(std::log(4.0) + std::log(2.0)).epsilon(1e-12));
  CHECK(hierarchical_entropy(TabularDistribution::uniform(4), chain, s) ==
        doctest::Approx(2.079442).epsilon(1e-6));

  Rng rng(5, 0);
  auto q = random_dist(rng, 4);
  const double c = 3.7;
  CHECK(hierarchical_entropy(q, chain, s.scaled(c)) ==
        doctest::Approx(c * hierarchical_entropy(q, chain, s)).epsilon(1e-12));
}

TEST_CASE("hierarchical kl: identity, base case, conditional decomposition") {
  std::vector<TransformStep> steps;
  steps.push_back(TransformStep::adjacent_pair_sum(4));
  TransformChain chain(std::move(steps));
  SigmaSchedule s({1.0, 1.0});

  TabularDistribution p = TabularDistribution::uniform(4);
  TabularDistribution q({0.75 * 0.5, 0.75 * 0.5, 0.25 * 0.5, 0.25 * 0.5});
  CHECK(hierarchical_kl(p, p, chain, s) == 0.0);

  auto chain1 = TransformChain::trivial(4);
  SigmaSchedule s1({1.5});
  CHECK(hierarchical_kl(p, q, chain1, s1) ==
        doctest::Approx(1.5 * kl(p, q)).epsilon(1e-12));

  // sigma_bar-weighted conditional decomposition:
  // D_h = sum_{i<d} sigma_bar_i E_P[ D(P_i|_{i+1} || Q_i|_{i+1}) ]
  //       + sigma_bar_d D(P_d || Q_d).
  Rng rng(77, 0);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 4 + rng.uniform_below(9);
    auto chain_r = random_chain(rng, n, 2 + rng.uniform_below(2));
    std::vector<double> sv;
    for (std::size_t i = 0; i < chain_r.depth(); ++i)
      sv.push_back(rng.uniform_range(0.3, 2.0));
    SigmaSchedule sr(sv);
    auto P = random_dist(rng, n);
    auto Q = random_dist(rng, n);

    double direct = hierarchical_kl(P, Q, chain_r, sr);
    double decomposed = 0.0;
    auto pcur = P;
    auto qcur = Q;
    for (std::size_t i = 1; i < chain_r.depth(); ++i) {
      const auto& step = chain_r.step(i);
      auto pd = disintegrate(pcur, step);
      auto qd = disintegrate(qcur, step);
      double cond_kl = 0.0;
      for (std::size_t y = 0; y < step.codomain_size(); ++y) {
        const auto& pr = pd.conditional.row(y);
        const auto& qr = qd.conditional.row(y);
        double row_kl = 0.0;
        for (std::size_t j = 0; j < pr.size(); ++j)
          if (pr[j] > 0.0) row_kl += pr[j] * std::log(pr[j] / qr[j]);
        cond_kl += pd.coarse.p(y) * row_kl;
      }
      decomposed += sr.sigma_bar(i) * cond_kl;
      pcur = pd.coarse;
      qcur = qd.coarse;
    }
    decomposed += sr.sigma_bar(chain_r.depth()) * kl(pcur, qcur);
    CHECK(std::fabs(direct - decomposed) <= 1e-10);
  }
}

TEST_CASE("chain rule identity for hierarchical entropy on random instances") {
  Rng rng(123, 0);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 4 + rng.uniform_below(13);
    auto chain = random_chain(rng, n, 2 + rng.uniform_below(3));
    std::vector<double> sv;
    for (std::size_t i = 0; i < chain.depth(); ++i)
      sv.push_back(rng.uniform_range(0.2, 2.5));
    SigmaSchedule s(sv);
    auto P = random_dist(rng, n);

    const double direct = hierarchical_entropy(P, chain, s);
    // sum_{i<d} sigma_bar_i H(X_i | X_{i+1}) + sigma_bar_d H(X_d)
    double decomposed = 0.0;
    auto cur = P;
    for (std::size_t i = 1; i < chain.depth(); ++i) {
      auto dis = disintegrate(cur, chain.step(i));
      double cond_h = 0.0;
      for (std::size_t y = 0; y < dis.coarse.n(); ++y)
        cond_h += dis.coarse.p(y) * entropy_of(dis.conditional.row(y));
      decomposed += s.sigma_bar(i) * cond_h;
      cur = dis.coarse;
    }
    decomposed += s.sigma_bar(chain.depth()) * entropy(cur);
    CHECK(std::fabs(direct - decomposed) <= 1e-10);
  }
}

TEST_CASE("data processing: coarse entropy below fine, fine below coarse plus log") {
  Rng rng(321, 0);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 4 + rng.uniform_below(13);
    const std::size_t m = 2 + rng.uniform_below(n - 2);
    auto step = random_step(rng, n, m);
    auto P = random_dist(rng, n);
    auto Q = random_dist(rng, n);
    const double hp = entropy(P);
    const double hc = entropy(pushforward(P, step));
    CHECK(hc <= hp + 1e-12);
    CHECK(hp <= hc + std::log(static_cast<double>(step.max_preimage_size())) + 1e-12);
    CHECK(kl(pushforward(P, step), pushforward(Q, step)) <= kl(P, Q) + 1e-12);
  }
}

TEST_CASE("expected_value and total_variation basics") {
  TabularDistribution p({0.25, 0.75});
  CHECK(expected_value(p, {0.0, 1.0}) == doctest::Approx(0.75));
  CHECK(total_variation(p, TabularDistribution({0.75, 0.25})) == doctest::Approx(0.5));
}

TEST_SUITE_END();
