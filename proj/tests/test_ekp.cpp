#include <gtest/gtest.h>

#include <cmath>

#include "tmslab/ekp.hpp"

using namespace tms;

namespace {

GraphPtr full2() { return share(MarkovGraph::full_shift(2)); }
GraphPtr golden() { return share(MarkovGraph::golden_mean()); }

double binary_entropy(double p) { return -p * std::log(p) - (1 - p) * std::log(1 - p); }

long double golden_p(long double t) {
  long double e = std::exp(t);
  return std::log((e + std::sqrt(e * e + 4 * e)) / 2);
}

}  // namespace

TEST(Decorrelation, FullShiftUsesPeriodFour) {
  auto g = full2();
  auto phi = LocallyConstantFunction::constant(g, 0);
  auto psi = LocallyConstantFunction::indicator(g, {0});
  auto m = rpf_measure(phi);
  auto mu = tilted_equilibrium(phi, psi, 0.7);
  auto d = decorrelated_observable(mu, m, g);
  EXPECT_EQ(d.period, 4u);
  EXPECT_EQ(d.base, 0u);
  std::set<std::vector<StateIndex>> keys;
  for (const auto& o : d.orbits) keys.insert(detail::min_rotation(o));
  EXPECT_EQ(keys.size(), 4u);
  EXPECT_LE(std::abs(d.int_A_mu), 1e-12);
  EXPECT_LE(std::abs(d.int_A_m), 1e-12);
  EXPECT_EQ(d.which, DecorrelationCase::mixed);
  EXPECT_GT(d.q_min_eigenvalue, 0);
  EXPECT_GT(d.holder_norm_A, 0);

  auto same = decorrelated_observable(m, m, g);
  EXPECT_EQ(same.which, DecorrelationCase::a_only);
  EXPECT_LE(std::abs(same.int_A_mu), 1e-12);
}

TEST(Decorrelation, RandomGraphsAndMarkovMeasures) {
  auto battery = spr_battery();
  for (std::size_t i = 2; i < battery.size(); ++i) {
    const auto& b = battery[i];
    auto m = rpf_measure(b.phi);
    auto fam = measure_family(b.phi, b.observables[1].psi, 7);
    for (const auto& mu : fam) {
      if (mu.kind == MeasureKind::periodic || mu.kind == MeasureKind::subgraph) continue;
      auto d = decorrelated_observable(mu, m, b.graph);
      EXPECT_LE(std::abs(d.int_A_mu), 1e-12) << b.name << " " << mu.provenance;
      EXPECT_LE(std::abs(d.int_A_m), 1e-12) << b.name << " " << mu.provenance;
      EXPECT_GT(d.q_min_eigenvalue, 0) << b.name;
    }
  }
}

TEST(Battery, DeterministicAndWellFormed) {
  auto a = spr_battery(), b = spr_battery();
  ASSERT_EQ(a.size(), 7u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(is_strongly_connected(*a[i].graph));
    EXPECT_EQ(period(*a[i].graph), 1u) << a[i].name;
    ASSERT_EQ(a[i].observables.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_EQ(a[i].observables[k].psi.table(), b[i].observables[k].psi.table());
    EXPECT_EQ(a[i].phi.table(), b[i].phi.table());
  }
  PortableRng r1(5), r2(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(r1.uniform(), r2.uniform());
}

TEST(Battery, PrimitiveOrbitCounts) {
  // necklace counts: full 2-shift 2,1,2,3,6,9; golden mean (Lucas) 1,1,1,1,2,2
  EXPECT_EQ(periodic_orbits(MarkovGraph::full_shift(2), 6).size(), 23u);
  EXPECT_EQ(periodic_orbits(MarkovGraph::golden_mean(), 6).size(), 8u);
}

TEST(Battery, EdgePartitionsAndSubgraphs) {
  auto g = MarkovGraph::full_shift(2);
  EXPECT_EQ(all_edge_partitions(g, 0).size(), 9u);
  auto subs = single_edge_subgraphs(g);
  // deleting 0->1 or 1->0 leaves the two fixed points; deleting a self loop leaves the other side
  EXPECT_EQ(subs.size(), 4u);
}

TEST(EKP, BernoulliScanMatchesClosedForm) {
  auto g = full2();
  auto phi = LocallyConstantFunction::constant(g, 0);
  auto psi = LocallyConstantFunction::indicator(g, {0});
  std::vector<MarkovMeasure> fam;
  std::vector<double> ps{0.05, 0.2, 0.4, 0.49, 0.6, 0.9};
  for (double p : ps) fam.push_back(bernoulli_family(g, {p, 1 - p}));
  auto s = ekp_scan(phi, psi, fam);
  ASSERT_EQ(s.records.size(), ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    double p = ps[i];
    double expect = std::abs(p - 0.5) / std::sqrt(std::log(2.0) - binary_entropy(p));
    EXPECT_NEAR(s.records[i].ratio, expect, 1e-9 * expect);
    EXPECT_NEAR(s.records[i].P_G, std::log(2.0), 1e-14);
    EXPECT_NEAR(s.records[i].int_psi_m, 0.5, 1e-14);
  }
  EXPECT_NEAR(s.sharp_limit, std::sqrt(2.0) * 0.5, 1e-10);
  EXPECT_NEAR(s.empirical_C, s.max_ratio / 2.0, 1e-15);  // ||1_[0]|| = 1 + e^0
}

TEST(EKP, RatioConventions) {
  EXPECT_EQ(detail::ekp_ratio(1e-12, 0.0, "x"), 0.0);
  EXPECT_THROW(detail::ekp_ratio(1e-3, 0.0, "x"), NumericError);
  EXPECT_THROW(detail::ekp_ratio(0.0, -1e-6, "x"), NumericError);
  EXPECT_DOUBLE_EQ(detail::ekp_ratio(-0.3, 0.09, "x"), 1.0);
}

TEST(EKP, SharpnessOnGoldenMean) {
  auto g = golden();
  auto phi = LocallyConstantFunction::constant(g, 0);
  auto psi = LocallyConstantFunction::indicator(g, {1});
  long double h = 1e-4L;
  double s2 = static_cast<double>((golden_p(h) - 2 * golden_p(0) + golden_p(-h)) / (h * h));
  auto r = sharpness_sequence(phi, psi, dyadic_sequence(8));
  EXPECT_NEAR(r.sigma * r.sigma, s2, 1e-7);
  for (std::size_t i = 1; i < r.t.size(); ++i)
    EXPECT_LT(std::abs(r.relative_error[i]), std::abs(r.relative_error[i - 1]));
  EXPECT_LT(std::abs(r.relative_error.back()), 0.01);
  auto neg = sharpness_sequence(phi, psi, {-0.01, 0.01});
  for (double e : neg.relative_error) EXPECT_LT(std::abs(e), 0.01);
}

TEST(EKP, SharpnessRefusesZeroVariance) {
  auto g = golden();
  auto phi = LocallyConstantFunction::constant(g, 0);
  LocallyConstantFunction u(g, 1, 0.0);
  u.set(std::vector<StateIndex>{0}, 1.0);
  EXPECT_THROW(sharpness_sequence(phi, coboundary(u, 0.3), dyadic_sequence(3)), PreconditionError);
}

TEST(EKP, LimitIsCoboundaryInvariant) {
  auto battery = spr_battery();
  for (const auto& b : battery) {
    const auto& ind = b.observables[0].psi;
    const auto& shifted = b.observables[2].psi;  // indicator plus a coboundary
    auto s1 = sharpness_sequence(b.phi, ind, {1e-3});
    auto s2 = sharpness_sequence(b.phi, shifted, {1e-3});
    EXPECT_NEAR(s1.sharp_limit, s2.sharp_limit, 1e-9) << b.name;
    EXPECT_NEAR(s1.records[0].ratio, s2.records[0].ratio, 1e-6) << b.name;
  }
}

TEST(EKP, ScaleAndShiftEquivariance) {
  auto b = spr_battery()[3];
  const auto& psi = b.observables[1].psi;
  auto fam = measure_family(b.phi, psi, 1);
  auto s = ekp_scan(b.phi, psi, fam);
  auto s3 = ekp_scan(b.phi, 3.0 * psi, fam);
  auto sc = ekp_scan(b.phi, psi + 5.0, fam);
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    EXPECT_NEAR(s3.records[i].ratio, 3 * s.records[i].ratio, 1e-8 * (1 + s.records[i].ratio));
    EXPECT_NEAR(sc.records[i].ratio, s.records[i].ratio, 1e-8 * (1 + s.records[i].ratio));
  }
  EXPECT_NEAR(s3.empirical_C, s.empirical_C, 1e-8);
  EXPECT_NEAR(s3.sharp_limit, 3 * s.sharp_limit, 1e-9);
}

TEST(EKP, SharpRegimeThreshold) {
  auto battery = spr_battery();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& b = battery[i];
    const auto& psi = b.observables[0].psi;
    auto fam = measure_family(b.phi, psi, 1);
    auto r = sharp_regime_check(b.phi, psi, 0.1, fam);
    EXPECT_FALSE(r.degenerate);
    EXPECT_GE(r.threshold, 1e-4) << b.name;
    EXPECT_GT(r.predicted_shape, 0);
    EXPECT_GT(r.qualifying, 0u);
  }
}

TEST(EKP, SharpRegimeDegenerateCase) {
  auto g = golden();
  auto phi = LocallyConstantFunction::constant(g, 0);
  LocallyConstantFunction u(g, 1, 0.0);
  u.set(std::vector<StateIndex>{1}, 1.0);
  auto psi = coboundary(u, 0.25);
  auto fam = measure_family(phi, psi, 1);
  auto r = sharp_regime_check(phi, psi, 0.1, fam);
  EXPECT_TRUE(r.degenerate);
  EXPECT_GE(r.qualifying, 1u);  // m itself
}

TEST(SprNecessity, RefusesSprAndGrows) {
  EXPECT_THROW(spr_necessity_demo(cubic_spr()), PreconditionError);
  auto ls = cubic_non_spr();
  auto r = spr_necessity_demo(ls, LoopWeights::base_indicator(), 2.0, 32);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_TRUE(r.increasing);
  EXPECT_GT(r.final_ratio, 2 * r.rows.front().ratio);
  EXPECT_DOUBLE_EQ(r.final_normalized, r.final_ratio / 2);

  // reference: 1 / mean loop length for f_k R^k, summed directly
  long double R = 0.25L, num = 0, den = 0;
  for (std::size_t k = 2; k <= 3000000; ++k) {
    long double q;
    if (k <= 1500) {
      long double f = std::floor(std::pow(4.0L, static_cast<long double>(k)) / (20.0L * k * k * k));
      q = f * std::pow(R, static_cast<long double>(k));
    } else {
      q = 1.0L / (20.0L * k * k * k);
    }
    num += q;
    den += q * k;
  }
  den += 1.0L / (20.0L * 3000000.0L);
  EXPECT_NEAR(r.reference, static_cast<double>(num / den), 1e-8);
}

TEST(Kadyrov, GoldenWindowHolds) {
  auto g = golden();
  auto phi = LocallyConstantFunction::constant(g, 0);
  auto psi = LocallyConstantFunction::indicator(g, {1});
  auto r = kadyrov_window_check(phi, psi, 0.2);
  EXPECT_GT(r.radius, 0);
  EXPECT_GE(r.H, 8.0);
  EXPECT_TRUE(r.ok) << r.worst_inner_lower_slack << " " << r.worst_inner_upper_slack << " " << r.worst_outer_slack;
  std::size_t outer = 0;
  for (const auto& w : r.rows) outer += !w.inner;
  EXPECT_GE(outer, 4u);
  EXPECT_THROW(kadyrov_window_check(phi, psi, 0.4), PreconditionError);
  EXPECT_THROW(kadyrov_window_check(phi, psi, 0.0), PreconditionError);
}

TEST(Battery, SlopesReachedAtLargeTilt) {
  // large |t| makes the transfer matrices badly scaled and nearly periodic
  for (const auto& b : spr_battery())
    for (const auto& o : b.observables) {
      auto s = asymptotic_slopes(o.psi);
      EXPECT_NEAR(pressure_point(b.phi, o.psi, 50).p1, s.max_mean, 1e-3) << b.name << " " << o.name;
      EXPECT_NEAR(pressure_point(b.phi, o.psi, -50).p1, s.min_mean, 1e-3) << b.name << " " << o.name;
    }
}
