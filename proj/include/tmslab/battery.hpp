#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tmslab/decorrelate.hpp"
#include "tmslab/thermo.hpp"

namespace tms {

// mt19937_64 is fully specified by the standard; the distributions are not, so
// uniforms are formed by hand to keep families identical across toolchains.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// Hamiltonian cycle s0 -> ... -> s{n-1} -> s0, a chord s{n-2} -> s0 closing an
// (n-1)-cycle (so the gcd of cycle lengths is 1), plus random edges.
inline MarkovGraph random_mixing_graph(std::uint64_t seed, std::size_t n, double density = 0.35) {
  if (n < 2) throw PreconditionError("random_mixing_graph: need at least 2 states");
  PortableRng rng(seed);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  std::set<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i) e.insert({i, (i + 1) % n});
  e.insert({n - 2, 0});
  if (n == 2) e.insert({0, 0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (rng.uniform() < density) e.insert({i, j});
  std::vector<std::pair<std::string, std::string>> edges;
  for (auto [i, j] : e) edges.push_back({ids[i], ids[j]});
  return MarkovGraph::from_edges(ids, edges);
}

struct NamedObservable {
  std::string name;
  LocallyConstantFunction psi;
};

struct BatteryGraph {
  std::string name;
  GraphPtr graph;
  LocallyConstantFunction phi;
  std::vector<NamedObservable> observables;
};

namespace detail {

inline LocallyConstantFunction grid_table(const GraphPtr& g, std::size_t memory, PortableRng& rng,
                                          const std::vector<double>& values) {
  LocallyConstantFunction f(g, memory, 0.0);
  for (const auto& w : admissible_words(*g, memory)) f.set(w, values[rng.below(values.size())]);
  return f;
}

inline std::vector<NamedObservable> standard_observables(const GraphPtr& g, PortableRng& rng) {
  std::vector<NamedObservable> obs;
  auto ind = LocallyConstantFunction::indicator(g, {0});
  obs.push_back({"indicator", ind});
  obs.push_back({"table2", grid_table(g, 2, rng, {-1, 0, 1, 2})});
  auto u = grid_table(g, 1, rng, {-1, 0, 1});
  obs.push_back({"indicator+coboundary", ind + coboundary(u, 0.0)});
  return obs;
}

}  // namespace detail

inline const char* kSprBatteryId = "spr-battery-v1";

// Full 2-shift and golden mean with phi = 0, and five seeded mixing graphs with
// 3..6 states carrying a discrete-valued memory-2 potential.
inline std::vector<BatteryGraph> spr_battery(std::uint64_t seed = 2024) {
  std::vector<BatteryGraph> out;
  PortableRng rng(seed);
  auto add = [&](std::string name, MarkovGraph g, bool zero_phi) {
    auto gp = share(std::move(g));
    auto phi = zero_phi ? LocallyConstantFunction::constant(gp, 0.0)
                        : detail::grid_table(gp, 2, rng, {-0.5, -0.25, 0.0, 0.25, 0.5});
    auto obs = detail::standard_observables(gp, rng);
    out.push_back({std::move(name), gp, std::move(phi), std::move(obs)});
  };
  add("full2", MarkovGraph::full_shift(2), true);
  add("golden", MarkovGraph::golden_mean(), true);
  for (std::size_t i = 0; i < 5; ++i) {
    std::size_t n = 3 + (i % 4);
    add("random" + std::to_string(i) + "(n=" + std::to_string(n) + ")", random_mixing_graph(seed * 101 + i, n), false);
  }
  return out;
}

// Distinct periodic orbits of exact period <= max_period, one loop word per orbit.
inline std::vector<std::vector<StateIndex>> periodic_orbits(const MarkovGraph& g, std::size_t max_period) {
  std::vector<std::vector<StateIndex>> out;
  std::set<std::vector<StateIndex>> seen;
  for (std::size_t p = 1; p <= max_period; ++p)
    for (StateIndex a = 0; a < g.size(); ++a)
      for (const auto& c : enumerate_cycles(g, a, p)) {
        const auto& w = c.symbols;
        bool primitive = true;
        for (std::size_t d = 1; d < p && primitive; ++d) {
          if (p % d) continue;
          bool rep = true;
          for (std::size_t i = d; i < p && rep; ++i) rep = w[i] == w[i - d];
          if (rep) primitive = false;
        }
        if (!primitive) continue;
        if (seen.insert(detail::min_rotation(w)).second) out.push_back(w);
      }
  return out;
}

// Nontrivial strongly connected pieces left after deleting a single edge.
inline std::vector<GraphPtr> single_edge_subgraphs(const MarkovGraph& g) {
  std::vector<GraphPtr> out;
  std::set<std::vector<std::string>> seen;
  for (const auto& e : g.edges()) {
    std::vector<char> covered(g.size(), 0);
    auto cut = [&](StateIndex u, StateIndex v) { return u == e.first && v == e.second; };
    for (StateIndex s = 0; s < g.size(); ++s) {
      if (covered[s]) continue;
      // SCC of s in g minus e
      std::vector<char> fwd(g.size(), 0), bwd(g.size(), 0);
      std::vector<StateIndex> stack{s};
      fwd[s] = 1;
      while (!stack.empty()) {
        auto u = stack.back();
        stack.pop_back();
        for (auto v : g.successors(u))
          if (!cut(u, v) && !fwd[v]) fwd[v] = 1, stack.push_back(v);
      }
      stack = {s};
      bwd[s] = 1;
      while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (StateIndex u = 0; u < g.size(); ++u)
          if (g.has_edge(u, v) && !cut(u, v) && !bwd[u]) bwd[u] = 1, stack.push_back(u);
      }
      std::vector<char> keep(g.size(), 0);
      for (StateIndex u = 0; u < g.size(); ++u)
        if (fwd[u] && bwd[u]) keep[u] = 1, covered[u] = 1;
      bool has_edge = false;
      for (StateIndex u = 0; u < g.size() && !has_edge; ++u)
        if (keep[u])
          for (auto v : g.successors(u))
            if (keep[v] && !cut(u, v)) has_edge = true;
      if (!has_edge) continue;
      auto sub = g.restricted(keep, {e});
      std::vector<std::string> skey;
      for (const auto& [u, v] : sub.edges()) skey.push_back(sub.id(u) + ">" + sub.id(v));
      if (seen.insert(skey).second) out.push_back(share(std::move(sub)));
    }
  }
  return out;
}

struct FamilyOptions {
  std::vector<double> tilts{-2, -1, -0.5, -0.2, -0.05, 0.05, 0.2, 0.5, 1, 2};
  std::vector<double> bernoulli_grid{0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49, 0.5, 0.51, 0.55, 0.6, 0.7, 0.8, 0.9, 0.95};
  std::size_t random_draws = 5;
  std::size_t max_period = 6;
  bool subgraphs = true;
};

// The measure family used against (phi, psi): m itself, tilts along psi,
// Bernoulli scans (full shifts) or random Markov measures, periodic orbits,
// and equilibrium measures of single-edge-deleted subgraphs.
inline std::vector<MarkovMeasure> measure_family(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                                 std::uint64_t seed, const FamilyOptions& opt = {}) {
  const auto& gp = phi.graph_ptr();
  const auto& g = *gp;
  std::vector<MarkovMeasure> fam;
  fam.push_back(rpf_measure(phi));
  for (double t : opt.tilts) fam.push_back(tilted_equilibrium(phi, psi, t));
  PortableRng rng(seed);
  bool full = g.edge_count() == g.size() * g.size();
  if (full) {
    for (double p : opt.bernoulli_grid) {
      if (g.size() != 2) break;
      fam.push_back(bernoulli_family(gp, {p, 1 - p}));
    }
    for (std::size_t i = 0; i < opt.random_draws; ++i) {
      std::vector<double> w(g.size());
      double s = 0;
      for (auto& x : w) s += (x = 0.05 + rng.uniform());
      for (auto& x : w) x /= s;
      fam.push_back(bernoulli_family(gp, w));
    }
  } else {
    for (std::size_t i = 0; i < opt.random_draws; ++i) {
      std::vector<std::vector<double>> P(g.size(), std::vector<double>(g.size(), 0.0));
      for (StateIndex a = 0; a < g.size(); ++a) {
        double s = 0;
        for (auto b : g.successors(a)) s += (P[a][b] = 0.05 + rng.uniform());
        for (auto b : g.successors(a)) P[a][b] /= s;
      }
      fam.push_back(markov_measure(gp, P, "markov(seed=" + std::to_string(seed) + ",draw=" + std::to_string(i) + ")"));
    }
  }
  for (const auto& w : periodic_orbits(g, opt.max_period)) fam.push_back(periodic_measure(gp, w));
  if (opt.subgraphs)
    for (const auto& sub : single_edge_subgraphs(g)) fam.push_back(subgraph_measure(gp, sub, phi));
  return fam;
}

// Every assignment of the out-edges of a to E0, E1 or neither.
inline std::vector<std::pair<std::vector<Edge>, std::vector<Edge>>> all_edge_partitions(const MarkovGraph& g, StateIndex a) {
  const auto& out = g.successors(a);
  std::size_t total = 1;
  for (std::size_t i = 0; i < out.size(); ++i) total *= 3;
  std::vector<std::pair<std::vector<Edge>, std::vector<Edge>>> parts;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<Edge> e0, e1;
    std::size_t c = code;
    for (auto v : out) {
      if (c % 3 == 0) e0.push_back({a, v});
      if (c % 3 == 1) e1.push_back({a, v});
      c /= 3;
    }
    parts.push_back({e0, e1});
  }
  return parts;
}

}  // namespace tms
