#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tmslab/observable.hpp"

using namespace tms;

namespace {

GraphPtr full2() { return share(MarkovGraph::full_shift(2)); }

LocallyConstantFunction random_table(const GraphPtr& g, std::size_t m, std::uint32_t seed) {
  std::mt19937 rng(seed);
  LocallyConstantFunction f(g, m, 0.0);
  for (const auto& w : admissible_words(*g, m)) f.set(w, static_cast<double>(static_cast<int>(rng() % 9) - 4) / 8.0);
  return f;
}

// Agreement length of two words of equal length.
std::size_t agree(const std::vector<StateIndex>& x, const std::vector<StateIndex>& y) {
  std::size_t t = 0;
  while (t < x.size() && x[t] == y[t]) ++t;
  return t;
}

double brute_seminorm(const LocallyConstantFunction& f, double beta) {
  auto words = admissible_words(f.graph(), f.memory());
  double best = 0;
  for (const auto& x : words)
    for (const auto& y : words) {
      auto t = agree(x, y);
      if (t >= f.memory()) continue;
      best = std::max(best, std::abs(f.value(x) - f.value(y)) * std::exp(beta * static_cast<double>(t)));
    }
  return best;
}

}  // namespace

TEST(Observable, Evaluate) {
  auto g = full2();
  auto c = LocallyConstantFunction::constant(g, 2.5);
  EXPECT_EQ(c.evaluate(g->word({0, 1, 1})), 2.5);
  EXPECT_EQ(LocallyConstantFunction::indicator(g, {0}).evaluate(g->word({0, 1})), 1.0);
  EXPECT_EQ(LocallyConstantFunction::indicator(g, {0, 1}).evaluate(g->word({0, 0, 1})), 0.0);
  auto gm = share(MarkovGraph::golden_mean());
  auto f = LocallyConstantFunction::indicator(gm, {0, 1});
  EXPECT_THROW(f.evaluate(gm->word({1, 1})), PreconditionError);
  EXPECT_THROW(f.evaluate(gm->word({0})), PreconditionError);
}

TEST(Observable, BirkhoffOnCycles) {
  auto g = full2();
  auto ind = LocallyConstantFunction::indicator(g, {0});
  EXPECT_EQ(birkhoff_sum_on_cycle(ind, g->word({0, 1})), 1.0);
  auto c = LocallyConstantFunction::constant(g, 0.75);
  EXPECT_EQ(birkhoff_sum_on_cycle(c, g->word({0, 1, 1, 0, 1})), 0.75 * 5);
  auto gm = share(MarkovGraph::golden_mean());
  EXPECT_THROW(birkhoff_sum_on_cycle(LocallyConstantFunction::indicator(gm, {0}), gm->word({1, 1})),
               PreconditionError);
}

TEST(Observable, CoboundaryCycleSumsExact) {
  for (std::uint32_t seed = 1; seed <= 4; ++seed) {
    auto g = share(oracle::random_mixing(seed, 3 + seed % 3));
    auto u = random_table(g, 1 + seed % 2, seed);
    for (double c : {0.0, 3.0, -0.375}) {
      auto psi = coboundary(u, c);
      EXPECT_EQ(psi.memory(), u.memory() + 1);
      for (std::size_t n = 1; n <= 8; ++n)
        for (StateIndex a = 0; a < g->size(); ++a)
          for (const auto& cyc : enumerate_cycles(*g, a, n)) ASSERT_EQ(birkhoff_sum_on_cycle(psi, cyc), c * n);
    }
  }
  auto g = full2();
  auto zero = coboundary(LocallyConstantFunction::constant(g, 0.0), 0.0);
  EXPECT_TRUE(zero.is_zero());
  auto u = LocallyConstantFunction::indicator(g, {0});
  EXPECT_EQ(birkhoff_sum_on_cycle(coboundary(u, 0), g->word({0, 1})), 0.0);
  EXPECT_EQ(birkhoff_sum_on_cycle(coboundary(u, 3), g->word({0, 1, 1, 0})), 12.0);
}

TEST(Observable, HolderNormExamples) {
  auto g = full2();
  auto c = holder_norm(LocallyConstantFunction::constant(g, -1.5), 1.0);
  EXPECT_EQ(c.sup_norm, 1.5);
  EXPECT_EQ(c.seminorm, 0.0);
  auto i1 = holder_norm(LocallyConstantFunction::indicator(g, {0}), 1.0);
  EXPECT_EQ(i1.sup_norm, 1.0);
  EXPECT_EQ(i1.seminorm, 1.0);
  EXPECT_EQ(i1.norm, 2.0);
  auto i11 = holder_norm(LocallyConstantFunction::indicator(g, {0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(i11.seminorm, std::exp(1.0));
}

TEST(Observable, HolderNormMatchesPairEnumerationAndIsMonotone) {
  for (std::uint32_t seed = 1; seed <= 8; ++seed) {
    auto g = share(oracle::random_mixing(seed, 3 + seed % 3));
    auto f = random_table(g, 1 + seed % 3, seed * 7);
    double prev = -1;
    for (double beta : {0.1, 0.5, 1.0, 2.0}) {
      auto h = holder_norm(f, beta);
      EXPECT_DOUBLE_EQ(h.seminorm, brute_seminorm(f, beta));
      EXPECT_GE(h.seminorm, prev);
      prev = h.seminorm;
    }
  }
}

TEST(Observable, OscillationVanishesBeyondMemory) {
  for (std::uint32_t seed = 1; seed <= 5; ++seed) {
    auto g = share(oracle::random_mixing(seed, 4));
    auto f = random_table(g, 3, seed);
    for (std::size_t n = 3; n <= 6; ++n) EXPECT_EQ(oscillation(f, n), 0.0);
    // brute force on length-3 words for n < 3
    auto words = admissible_words(*g, 3);
    for (std::size_t n = 0; n < 3; ++n) {
      double o = 0;
      for (const auto& x : words)
        for (const auto& y : words)
          if (agree(x, y) >= n) o = std::max(o, std::abs(f.value(x) - f.value(y)));
      EXPECT_EQ(oscillation(f, n), o);
    }
  }
}

TEST(Observable, ShiftAndPromotion) {
  auto g = full2();
  auto f = random_table(g, 2, 3);
  auto s = f.shifted();
  auto p = f.promoted(3);
  for (const auto& w : admissible_words(*g, 3)) {
    EXPECT_EQ(s.value(w), f.value(std::vector<StateIndex>{w[1], w[2]}));
    EXPECT_EQ(p.value(w), f.value(w));
  }
}

TEST(Observable, SmallSigmaFamilyCycleSums) {
  auto g = share(MarkovGraph::golden_mean());
  auto psi = LocallyConstantFunction::indicator(g, {0});
  auto one = small_sigma_family(psi, 1);
  auto manual = psi + psi.promoted(2) - psi.shifted();
  for (const auto& w : admissible_words(*g, 2)) EXPECT_EQ(one.value(w), manual.value(w));
  for (std::size_t n : {1u, 4u, 16u}) {
    auto pn = small_sigma_family(psi, n);
    for (std::size_t L = 1; L <= 8; ++L)
      for (const auto& c : enumerate_cycles(*g, 0, L))
        EXPECT_NEAR(birkhoff_sum_on_cycle(pn, c), birkhoff_sum_on_cycle(psi, c) / static_cast<double>(n), 1e-14);
  }
  EXPECT_THROW(small_sigma_family(LocallyConstantFunction::constant(g, 0), 2), PreconditionError);
}

TEST(Observable, CohomologyToConstant) {
  auto g = full2();
  auto c = cohomology_to_constant_test(LocallyConstantFunction::constant(g, 1.25), 6);
  EXPECT_TRUE(c.constant);
  EXPECT_EQ(c.average, 1.25);
  auto ind = cohomology_to_constant_test(LocallyConstantFunction::indicator(g, {0}), 2);
  ASSERT_FALSE(ind.constant);
  EXPECT_EQ(g->format(*ind.witness_a), "1");
  EXPECT_EQ(ind.average_a, 1.0);
  EXPECT_EQ(g->format(*ind.witness_b), "2");
  EXPECT_EQ(ind.average_b, 0.0);
  for (std::uint32_t seed = 1; seed <= 3; ++seed) {
    auto h = share(oracle::random_mixing(seed, 4));
    auto cob = cohomology_to_constant_test(coboundary(random_table(h, 2, seed), 0.5), 8);
    EXPECT_TRUE(cob.constant);
    EXPECT_NEAR(cob.average, 0.5, 1e-15);
  }
  EXPECT_THROW(cohomology_to_constant_test(LocallyConstantFunction::constant(g, 0), 65), CapExceeded);
}

TEST(Observable, TransportToSubgraph) {
  auto g = full2();
  auto sub = share(MarkovGraph::golden_mean());
  auto f = random_table(g, 2, 11);
  auto t = f.transported(sub);
  for (const auto& w : admissible_words(*sub, 2)) EXPECT_EQ(t.value(w), f.value(w));
}
