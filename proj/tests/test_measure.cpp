#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tmslab/measure.hpp"
#include "tmslab/thermo.hpp"

using namespace tms;

namespace {

const double kGolden = (1 + std::sqrt(5.0)) / 2;

GraphPtr full2() { return share(MarkovGraph::full_shift(2)); }

LocallyConstantFunction random_table(const GraphPtr& g, std::size_t m, std::uint32_t seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  LocallyConstantFunction f(g, m, 0.0);
  for (const auto& w : admissible_words(*g, m)) f.set(w, u(rng));
  return f;
}

double binary_entropy(double p) { return -p * std::log(p) - (1 - p) * std::log(1 - p); }

// Fraction of period-n points (counted via matrix powers) whose orbit code
// starts with w: an exact finite-n cylinder frequency.
double periodic_frequency(const MarkovGraph& g, const std::vector<StateIndex>& w, std::size_t n) {
  auto A = oracle::adjacency(g);
  auto An = oracle::power(A, n);
  long long total = 0;
  for (std::size_t i = 0; i < A.size(); ++i) total += An[i][i];
  auto Ar = oracle::power(A, n - (w.size() - 1));
  for (std::size_t i = 0; i + 1 < w.size(); ++i)
    if (!g.has_edge(w[i], w[i + 1])) return 0;
  return static_cast<double>(Ar[w.back()][w.front()]) / static_cast<double>(total);
}

}  // namespace

TEST(Measure, ParryFullShiftIsUniformBernoulli) {
  auto mu = parry_measure(full2());
  EXPECT_EQ(mu.kind, MeasureKind::parry);
  for (std::size_t a = 0; a < 2; ++a) {
    EXPECT_NEAR(mu.pi[a], 0.5, 1e-15);
    for (std::size_t b = 0; b < 2; ++b) EXPECT_NEAR(mu.transition(a, b), 0.5, 1e-15);
  }
  EXPECT_NEAR(entropy(mu), std::log(2.0), 1e-15);
}

TEST(Measure, ParryGoldenMean) {
  auto g = share(MarkovGraph::golden_mean());
  auto mu = parry_measure(g);
  EXPECT_NEAR(mu.pi[0], kGolden / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(mu.transition(0, 0), 1 / kGolden, 1e-12);
  EXPECT_NEAR(mu.transition(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(entropy(mu), std::log(kGolden), 1e-12);
  EXPECT_NEAR(mu.pi[0], periodic_frequency(*g, {0}, 20), 1e-3);
  EXPECT_NEAR(mu.cylinder_mass(std::vector<StateIndex>{0, 0}), periodic_frequency(*g, {0, 0}, 20), 1e-3);
}

TEST(Measure, ParryCycleWithChordMatchesCylinderFrequencies) {
  auto g = share(MarkovGraph::from_edges({"1", "2", "3"}, {{"1", "2"}, {"2", "3"}, {"3", "1"}, {"1", "3"}}));
  ASSERT_EQ(period(*g), 1u);
  auto mu = parry_measure(g);
  for (const auto& w : admissible_words(*g, 3)) EXPECT_NEAR(mu.cylinder_mass(w), periodic_frequency(*g, w, 40), 2e-3);
}

TEST(Measure, Invariants) {
  for (std::uint32_t seed = 1; seed <= 6; ++seed) {
    auto g = share(oracle::random_mixing(seed, 3 + seed % 4));
    auto phi = random_table(g, 1 + seed % 3, seed);
    auto mu = rpf_measure(phi);
    EXPECT_LE(mu.row_sum_residual(), 1e-13);
    EXPECT_LE(mu.stationarity_residual(), 1e-13);
    // full support of equilibrium measures
    auto L = transfer_matrix(phi);
    for (std::size_t a = 0; a < L.size(); ++a)
      for (auto [b, w] : L.weight[a]) EXPECT_GT(mu.transition(a, b), 0.0);
    // conditional identity: P_ab equals the ratio of cylinder masses
    for (std::size_t a = 0; a < mu.size(); ++a)
      for (auto [b, p] : mu.P[a]) {
        auto w = mu.alphabet[a];
        w.push_back(mu.alphabet[b].back());
        EXPECT_NEAR(mu.cylinder_mass(w) / mu.cylinder_mass(mu.alphabet[a]), p, 1e-12);
      }
  }
}

TEST(Measure, RpfBernoulliClosedForm) {
  auto g = full2();
  for (double t : {-2.0, 0.0, 0.5, 3.0}) {
    auto mu = tilted_equilibrium(LocallyConstantFunction::constant(g, 0), LocallyConstantFunction::indicator(g, {0}), t);
    double p = std::exp(t) / (std::exp(t) + 1);
    EXPECT_NEAR(mu.pi[0], p, 1e-13);
    EXPECT_NEAR(mu.transition(1, 0), p, 1e-13);
    EXPECT_EQ(mu.kind, MeasureKind::tilted);
  }
}

TEST(Measure, VariationalPrincipleOnRandomGraphs) {
  for (std::uint32_t seed = 1; seed <= 8; ++seed) {
    auto g = share(oracle::random_mixing(seed, 3 + seed % 4));
    auto phi = random_table(g, 2, seed, 1.5);
    double P = pressure_finite(phi);
    EXPECT_NEAR(measure_pressure(rpf_measure(phi), phi), P, 1e-10);
    EXPECT_LT(measure_pressure(parry_measure(g), phi), P - 1e-8);
    for (StateIndex a = 0; a < g->size(); ++a)
      for (const auto& c : enumerate_cycles(*g, a, 3)) EXPECT_LT(measure_pressure(periodic_measure(g, c.symbols), phi), P);
  }
}

TEST(Measure, EntropyAndIntegralExamples) {
  auto g = full2();
  auto ind = LocallyConstantFunction::indicator(g, {0});
  for (double p : {0.1, 0.4, 0.5, 0.77}) {
    auto b = bernoulli_family(g, {p, 1 - p});
    EXPECT_NEAR(entropy(b), binary_entropy(p), 1e-15);
    EXPECT_NEAR(integrate(b, ind), p, 1e-15);
  }
  auto gm = share(MarkovGraph::golden_mean());
  auto parry = parry_measure(gm);
  EXPECT_NEAR(integrate(parry, LocallyConstantFunction::indicator(gm, {0})), kGolden / std::sqrt(5.0), 1e-12);
  auto per = periodic_measure(g, std::vector<StateIndex>{0, 1});
  EXPECT_EQ(entropy(per), 0.0);
  EXPECT_NEAR(integrate(per, ind), 0.5, 1e-15);
  EXPECT_EQ(measure_pressure(per, LocallyConstantFunction::constant(g, 0)), 0.0);
  auto u = random_table(g, 2, 3);
  for (const auto& mu : {parry_measure(g), per, bernoulli_family(g, {0.3, 0.7})})
    EXPECT_NEAR(integrate(mu, coboundary(u, 0.6)), 0.6, 1e-14);
  EXPECT_THROW(bernoulli_family(gm, {0.5, 0.5}), PreconditionError);
}

TEST(Measure, PeriodicMeasureUsesPrimitiveRoot) {
  auto g = full2();
  auto mu = periodic_measure(g, std::vector<StateIndex>{0, 1, 0, 1});
  EXPECT_EQ(mu.size(), 2u);
  EXPECT_EQ(mu.provenance, "periodic(1,2)");
  auto fixed = periodic_measure(g, std::vector<StateIndex>{1});
  EXPECT_EQ(fixed.order, 1u);
  EXPECT_NEAR(integrate(fixed, LocallyConstantFunction::indicator(g, {1, 1, 1})), 1.0, 1e-15);
  EXPECT_THROW(periodic_measure(share(MarkovGraph::golden_mean()), std::vector<StateIndex>{1}), PreconditionError);
}

TEST(Measure, SubgraphMeasureSupport) {
  auto g = full2();
  auto sub = share(MarkovGraph::golden_mean());
  auto mu = subgraph_measure(g, sub);
  EXPECT_GT(mu.cylinder_mass(std::vector<StateIndex>{0, 1}), 0.0);
  EXPECT_EQ(mu.cylinder_mass(std::vector<StateIndex>{1, 1}), 0.0);
  EXPECT_NEAR(entropy(mu), std::log(kGolden), 1e-12);
  // periodic subgraph: a 2-cycle inside the full shift
  auto two = share(MarkovGraph::from_edges({"1", "2"}, {{"1", "2"}, {"2", "1"}}));
  auto m2 = subgraph_measure(g, two);
  EXPECT_NEAR(m2.pi[0], 0.5, 1e-14);
  EXPECT_NEAR(entropy(m2), 0.0, 1e-15);
}

TEST(Measure, LiftPreservesCylinders) {
  auto g = share(oracle::random_mixing(4, 4));
  auto mu = rpf_measure(random_table(g, 2, 4));
  auto lift = mu.lifted(4);
  EXPECT_LE(lift.stationarity_residual(), 1e-13);
  for (const auto& w : admissible_words(*g, 5)) EXPECT_NEAR(lift.cylinder_mass(w), mu.cylinder_mass(w), 1e-15);
  auto f = random_table(g, 4, 9);
  EXPECT_NEAR(integrate(mu, f), integrate(lift, f), 1e-14);
}

TEST(Measure, TiltedDerivativeIdentity) {
  auto g = share(MarkovGraph::golden_mean());
  auto phi = LocallyConstantFunction::constant(g, 0), psi = LocallyConstantFunction::indicator(g, {0});
  for (double t : {-1.0, 0.0, 0.8}) {
    auto mt = tilted_equilibrium(phi, psi, t);
    double h = 1e-5;
    double fd = (curve_pressure(phi, psi, t + h) - curve_pressure(phi, psi, t - h)) / (2 * h);
    EXPECT_NEAR(integrate(mt, psi), fd, 1e-6);
    EXPECT_NEAR(entropy(mt) + t * integrate(mt, psi), curve_pressure(phi, psi, t), 1e-10);
  }
  auto m0 = tilted_equilibrium(phi, psi, 0.0);
  auto r = rpf_measure(phi);
  for (std::size_t a = 0; a < m0.size(); ++a) EXPECT_NEAR(m0.pi[a], r.pi[a], 1e-15);
}
