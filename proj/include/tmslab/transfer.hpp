#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "tmslab/config.hpp"
#include "tmslab/error.hpp"
#include "tmslab/graph.hpp"
#include "tmslab/loops.hpp"
#include "tmslab/observable.hpp"

namespace tms {

using SparseRows = std::vector<std::vector<std::pair<StateIndex, double>>>;

// Neumaier-compensated accumulator.
struct KahanSum {
  double sum = 0, c = 0;
  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

// L on the block graph of order k = max(1, m-1): the edge s -> s' carries
// exp(phi(s followed by the last symbol of s')). `weight` is the diagonally
// rescaled matrix exp(lw(s,s') + g(s') - g(s) - shift), where shift is the
// largest cycle mean of lw and g a max-plus potential, so every entry is <= 1
// and the critical cycles have weight 1. Loop sums are unaffected; a right
// eigenvector x of `weight` gives e^g x for the original matrix, a left one
// e^-g x.
struct TransferMatrix {
  GraphPtr base;
  BlockGraph blocks;
  SparseRows log_weight;
  SparseRows weight;
  std::vector<double> gauge;
  double shift = 0;
  std::size_t period = 1;

  std::size_t size() const { return weight.size(); }
  const std::size_t& order() const { return blocks.order; }

  double entry(StateIndex a, StateIndex b) const {
    for (auto [j, lw] : log_weight[a])
      if (j == b) return std::exp(lw);
    return 0.0;
  }
};

inline void require_same_graph(const MarkovGraph& g, const LocallyConstantFunction& f) {
  if (&f.graph() != &g && !(f.graph() == g)) throw PreconditionError("observable is defined on a different graph");
}

namespace detail {

// Largest cycle mean of an edge-weighted graph (Karp).
inline double karp_max_mean(const SparseRows& w) {
  const std::size_t n = w.size();
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> D(n + 1, std::vector<double>(n, ninf));
  std::fill(D[0].begin(), D[0].end(), 0.0);
  for (std::size_t j = 1; j <= n; ++j)
    for (std::size_t u = 0; u < n; ++u) {
      if (D[j - 1][u] == ninf) continue;
      for (auto [v, x] : w[u]) D[j][v] = std::max(D[j][v], D[j - 1][u] + x);
    }
  double best = ninf;
  for (std::size_t v = 0; v < n; ++v) {
    if (D[n][v] == ninf) continue;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (D[j][v] != ninf) worst = std::min(worst, (D[n][v] - D[j][v]) / static_cast<double>(n - j));
    best = std::max(best, worst);
  }
  return best;
}

// g(s) = longest path from s in lw - mu (empty path allowed), so that
// lw(s,t) - mu + g(t) - g(s) <= 0.
inline std::vector<double> maxplus_potential(const SparseRows& lw, double mu) {
  const std::size_t n = lw.size();
  std::vector<double> g(n, 0.0);
  for (std::size_t it = 0; it < n; ++it) {
    bool changed = false;
    for (std::size_t s = 0; s < n; ++s)
      for (auto [t, v] : lw[s]) {
        double c = v - mu + g[t];
        if (c > g[s] + 1e-12 * (1 + std::abs(g[s]))) g[s] = c, changed = true;
      }
    if (!changed) break;
  }
  return g;
}

}  // namespace detail

inline TransferMatrix transfer_matrix(const LocallyConstantFunction& phi) {
  TransferMatrix L;
  L.base = phi.graph_ptr();
  const std::size_t m = phi.memory();
  const std::size_t k = std::max<std::size_t>(1, m - 1);
  L.blocks = higher_block(*L.base, k);
  const auto& bg = L.blocks.graph;
  L.log_weight.resize(bg.size());
  std::vector<StateIndex> w(k + 1);
  for (StateIndex s = 0; s < bg.size(); ++s) {
    const auto& ws = L.blocks.words[s];
    std::copy(ws.begin(), ws.end(), w.begin());
    for (StateIndex t : bg.successors(s)) {
      w[k] = L.blocks.words[t].back();
      double v = phi.value(w);
      if (!std::isfinite(v)) throw PreconditionError("potential must be finite");
      L.log_weight[s].emplace_back(t, v);
    }
  }
  if (bg.size() <= 2048) {
    L.shift = detail::karp_max_mean(L.log_weight);
    L.gauge = detail::maxplus_potential(L.log_weight, L.shift);
  } else {
    L.shift = -std::numeric_limits<double>::infinity();
    for (const auto& row : L.log_weight)
      for (auto [j, v] : row) L.shift = std::max(L.shift, v);
    L.gauge.assign(bg.size(), 0.0);
  }
  L.weight = L.log_weight;
  for (StateIndex s = 0; s < bg.size(); ++s)
    for (auto& [j, v] : L.weight[s]) v = std::exp(std::max(v + L.gauge[j] - L.gauge[s] - L.shift, -700.0));
  L.period = period(bg);
  return L;
}

inline TransferMatrix transfer_matrix(const MarkovGraph& g, const LocallyConstantFunction& phi) {
  require_same_graph(g, phi);
  return transfer_matrix(phi);
}

struct RPFData {
  double lambda = 0;
  double log_lambda = 0;
  std::vector<double> right;  // h
  std::vector<double> left;   // nu, a probability vector
  double right_residual = 0;
  double left_residual = 0;
  std::size_t iterations = 0;
};

namespace detail {

inline SparseRows transpose(const SparseRows& a) {
  SparseRows t(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (auto [j, v] : a[i]) t[j].emplace_back(i, v);
  return t;
}

inline void apply(const SparseRows& a, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    KahanSum s;
    for (auto [j, v] : a[i]) s.add(v * x[j]);
    y[i] = s.value();
  }
}

struct PerronSolve {
  std::vector<double> v;
  double lo = 0, hi = 0;
  std::size_t iterations = 0;
};

// Collatz-Wielandt bounds of x: min and max of (Ax)_i / x_i.
inline std::pair<double, double> cw_bounds(const std::vector<double>& x, const std::vector<double>& y) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] / x[i];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo, hi};
}

// Power iteration stopped by the Collatz-Wielandt gap; switches to Noda's
// shifted inverse iteration when the gap stops shrinking (near-periodic
// spectra) or from the start for periodic matrices.
inline PerronSolve perron_solve(const SparseRows& a, double tol, std::size_t max_iter, bool periodic) {
  const std::size_t n = a.size();
  PerronSolve r;
  std::vector<double> x(n, 1.0), y(n);
  std::vector<double> history;
  bool noda = periodic, polish = false;
  int noda_stalls = 0;
  Eigen::SparseMatrix<double> A;
  if (n == 1) {
    apply(a, x, y);
    r.v = x;
    r.lo = r.hi = y[0];
    r.iterations = 1;
    return r;
  }
  auto build_sparse = [&] {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < n; ++i)
      for (auto [j, v] : a[i]) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    A.resize(static_cast<int>(n), static_cast<int>(n));
    A.setFromTriplets(trip.begin(), trip.end());
  };
  if (noda) build_sparse();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    apply(a, x, y);
    auto [lo, hi] = cw_bounds(x, y);
    r.iterations = it;
    if (!(hi > 0) || !std::isfinite(hi)) throw NumericError("perron iteration broke down (non-positive iterate)");
    if (hi - lo <= tol * hi) {
      r.v = x;
      r.lo = lo;
      r.hi = hi;
      return r;
    }
    history.push_back(hi - lo);
    if (!noda && !polish && history.size() > 64 && history.back() > 0.5 * history[history.size() - 33]) {
      noda = true;
      build_sparse();
    }
    // Noda steps lose relative accuracy in tiny components; once they stop
    // helping, finish with shifted power steps
    if (noda && history.size() > 1 && history.back() > 0.5 * history[history.size() - 2]) {
      if (++noda_stalls >= 3) noda = false, polish = true;
    }
    if (noda) {
      double sigma = hi * (1 + 4 * std::numeric_limits<double>::epsilon());
      Eigen::SparseMatrix<double> M = -A;
      for (int i = 0; i < static_cast<int>(n); ++i) M.coeffRef(i, i) += sigma;
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(M);
      bool ok = lu.info() == Eigen::Success;
      Eigen::VectorXd z;
      if (ok) {
        z = lu.solve(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n)));
        ok = lu.info() == Eigen::Success && z.allFinite() && z.minCoeff() > 0;
      }
      if (ok) {
        double mx = z.maxCoeff();
        for (std::size_t i = 0; i < n; ++i) x[i] = z[static_cast<Eigen::Index>(i)] / mx;
        continue;
      }
    }
    if (noda || polish)  // shifted power step: damps the eigenvalues near lambda * root of unity
      for (std::size_t i = 0; i < n; ++i) y[i] += hi * x[i];
    double mx = *std::max_element(y.begin(), y.end());
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / mx;
    for (double v : x)
      if (!(v > 0)) throw NumericError("perron iteration produced a non-positive entry; graph not irreducible?");
  }
  throw NumericError("perron iteration did not converge in " + std::to_string(max_iter) +
                     " iterations; last Collatz-Wielandt gap " +
                     std::to_string(history.empty() ? 0.0 : history.back()));
}

inline double residual(const SparseRows& a, const std::vector<double>& x, double lambda) {
  std::vector<double> y(x.size());
  apply(a, x, y);
  double r = 0;
  for (std::size_t i = 0; i < x.size(); ++i) r = std::max(r, std::abs(y[i] - lambda * x[i]));
  return r;
}

inline RPFData perron_core(const TransferMatrix& L, double tol, std::size_t max_iter, bool periodic) {
  auto R = perron_solve(L.weight, tol, max_iter, periodic);
  auto LT = transpose(L.weight);
  auto Lf = perron_solve(LT, tol, max_iter, periodic);
  RPFData d;
  d.iterations = R.iterations + Lf.iterations;
  d.right = R.v;
  d.left = Lf.v;
  double s = 0;
  for (double v : d.left) s += v;
  for (double& v : d.left) v /= s;
  std::vector<double> Lh(d.right.size());
  apply(L.weight, d.right, Lh);
  KahanSum num, den;
  for (std::size_t i = 0; i < Lh.size(); ++i) {
    num.add(d.left[i] * Lh[i]);
    den.add(d.left[i] * d.right[i]);
  }
  double lam = num.value() / den.value();
  double lo = std::max(R.lo, Lf.lo), hi = std::min(R.hi, Lf.hi);
  if (lo <= hi) lam = std::clamp(lam, lo, hi);
  for (double& v : d.right) v /= den.value();
  double hmax = *std::max_element(d.right.begin(), d.right.end());
  double nmax = *std::max_element(d.left.begin(), d.left.end());
  d.right_residual = residual(L.weight, d.right, lam) / (lam * hmax);
  d.left_residual = residual(LT, d.left, lam) / (lam * nmax);
  const double slack = 1 + 1e-9;
  if (d.right_residual > tol * slack + 1e-15 || d.left_residual > tol * slack + 1e-15)
    throw NumericError("perron residual above tolerance: right " + std::to_string(d.right_residual) + ", left " +
                       std::to_string(d.left_residual));
  d.log_lambda = std::log(lam) + L.shift;
  d.lambda = std::exp(d.log_lambda);
  return d;
}

}  // namespace detail

inline RPFData perron_data(const TransferMatrix& L, double tol = defaults::eigen_tol,
                           std::size_t max_iter = defaults::eigen_max_iter) {
  if (!(tol > 0)) throw PreconditionError("perron_data: tol must be positive");
  if (L.period != 1)
    throw PreconditionError("perron_data: graph has period " + std::to_string(L.period) +
                            "; decompose spectrally first");
  return detail::perron_core(L, tol, max_iter, false);
}

// Perron data of an irreducible, possibly periodic, matrix. Used for
// measures supported on periodic subgraphs.
inline RPFData perron_data_irreducible(const TransferMatrix& L, double tol = defaults::eigen_tol,
                                       std::size_t max_iter = defaults::eigen_max_iter) {
  return detail::perron_core(L, tol, max_iter, L.period != 1);
}

// The p-step potential phi + phi o sigma + ... + phi o sigma^{p-1} on the
// recoded graph of a spectral component.
inline LocallyConstantFunction p_step_potential(const LocallyConstantFunction& phi, const BlockGraph& recoded,
                                                GraphPtr recoded_graph) {
  const std::size_t p = recoded.order, m = phi.memory();
  const std::size_t r = (p + m - 1 + p - 1) / p;
  LocallyConstantFunction out(recoded_graph, r, 0.0);
  std::vector<StateIndex> seq;
  for (const auto& w : admissible_words(*recoded_graph, r)) {
    seq.clear();
    for (StateIndex s : w) seq.insert(seq.end(), recoded.words[s].begin(), recoded.words[s].end());
    double v = 0;
    for (std::size_t i = 0; i < p; ++i) v += phi.value(std::span<const StateIndex>(seq).subspan(i, m));
    out.set(w, v);
  }
  return out;
}

inline double pressure_finite(const LocallyConstantFunction& phi, double tol = defaults::eigen_tol) {
  const auto& g = phi.graph();
  if (!is_strongly_connected(g)) throw PreconditionError("pressure: graph not strongly connected");
  auto L = transfer_matrix(phi);
  if (L.period == 1) return perron_data(L, tol).log_lambda;
  auto sd = spectral_decomposition(g);
  const auto& comp = sd.components[0];
  auto rg = share(comp.recoded.graph);
  auto phip = p_step_potential(phi, comp.recoded, rg);
  return pressure_finite(phip, tol) / static_cast<double>(sd.period);
}

inline double pressure_finite(const MarkovGraph& g, const LocallyConstantFunction& phi,
                              double tol = defaults::eigen_tol) {
  require_same_graph(g, phi);
  return pressure_finite(phi, tol);
}

namespace detail {

// log of the sum over loops (a, x1, ..., x_{n-1}) of exp(Birkhoff sum),
// optionally only first returns, optionally with the first step x1
// restricted. Runs on the block graph with per-step rescaling.
inline double log_loop_sum(const TransferMatrix& L, StateIndex a, std::size_t n, bool first_return,
                           const std::function<bool(StateIndex)>& first_step_ok, std::size_t cap) {
  check_cap(n, cap);
  if (n == 0) throw PreconditionError("loop length must be >= 1");
  const auto& words = L.blocks.words;
  const std::size_t N = L.size();
  std::vector<double> logs;
  std::vector<double> v(N), w(N);
  for (StateIndex s = 0; s < N; ++s) {
    if (words[s][0] != a) continue;
    std::fill(v.begin(), v.end(), 0.0);
    v[s] = 1.0;
    double logscale = 0;
    bool dead = false;
    for (std::size_t step = 1; step <= n && !dead; ++step) {
      std::fill(w.begin(), w.end(), 0.0);
      std::vector<KahanSum> acc(N);
      for (StateIndex u = 0; u < N; ++u) {
        if (v[u] == 0) continue;
        for (auto [t, wt] : L.weight[u]) {
          if (step == 1 && first_step_ok && !first_step_ok(words[t][0])) continue;
          if (first_return && step < n && words[t][0] == a) continue;
          acc[t].add(v[u] * wt);
        }
      }
      double mx = 0;
      for (StateIndex t = 0; t < N; ++t) {
        w[t] = acc[t].value();
        mx = std::max(mx, w[t]);
      }
      if (mx == 0) {
        dead = true;
        break;
      }
      for (double& x : w) x /= mx;
      logscale += std::log(mx);
      std::swap(v, w);
    }
    if (!dead && v[s] > 0) logs.push_back(std::log(v[s]) + logscale);
  }
  if (logs.empty()) return -std::numeric_limits<double>::infinity();
  double mx = *std::max_element(logs.begin(), logs.end());
  KahanSum s;
  for (double l : logs) s.add(std::exp(l - mx));
  return mx + std::log(s.value()) + static_cast<double>(n) * L.shift;
}

}  // namespace detail

inline double log_partition_sum(const LocallyConstantFunction& phi, StateIndex a, std::size_t n,
                                std::size_t cap = defaults::enumeration_cap) {
  auto L = transfer_matrix(phi);
  return detail::log_loop_sum(L, a, n, false, {}, cap);
}

inline double partition_sum(const MarkovGraph& g, const LocallyConstantFunction& phi, StateIndex a, std::size_t n,
                            std::size_t cap = defaults::enumeration_cap) {
  require_same_graph(g, phi);
  return std::exp(log_partition_sum(phi, a, n, cap));
}

inline double first_return_sum(const MarkovGraph& g, const LocallyConstantFunction& phi, StateIndex a,
                               std::size_t n, std::size_t cap = defaults::enumeration_cap) {
  require_same_graph(g, phi);
  auto L = transfer_matrix(phi);
  return std::exp(detail::log_loop_sum(L, a, n, true, {}, cap));
}

struct ZStarSplitReport {
  std::size_t n = 0;
  double total = 0, e0 = 0, e1 = 0, core = 0;
  double sub0 = 0, sub1 = 0;  // first-return sums on the restricted graphs
  double split_residual = 0, identity_residual0 = 0, identity_residual1 = 0;
  bool ok = false;
};

struct ZStarSplitExact {
  std::size_t n = 0;
  BigInt total, e0, e1, core, sub0, sub1;
  bool split_ok = false, identity_ok = false;
};

namespace detail {

struct EdgePartition {
  std::set<StateIndex> t0, t1, tcore;
};

inline EdgePartition validate_partition(const MarkovGraph& g, StateIndex a, const std::vector<Edge>& E0,
                                        const std::vector<Edge>& E1) {
  EdgePartition p;
  for (const auto* E : {&E0, &E1}) {
    auto& dst = E == &E0 ? p.t0 : p.t1;
    for (auto [u, v] : *E) {
      if (u != a || !g.has_edge(u, v)) throw PreconditionError("zstar split: partition edge is not an outgoing edge of a");
      if (!dst.insert(v).second) throw PreconditionError("zstar split: repeated edge in partition");
    }
  }
  for (StateIndex v : p.t0)
    if (p.t1.count(v)) throw PreconditionError("zstar split: E0 and E1 overlap");
  for (StateIndex v : g.successors(a))
    if (!p.t0.count(v) && !p.t1.count(v)) p.tcore.insert(v);
  return p;
}

// Graph with E_{1-i} removed, restricted to the strongly connected
// component of a. Empty optional when a has no loop left.
inline std::optional<GraphPtr> split_subgraph(const MarkovGraph& g, StateIndex a, const std::vector<Edge>& drop) {
  std::vector<char> all(g.size(), 1);
  MarkovGraph h;
  try {
    h = g.restricted(all, drop);
  } catch (const PreconditionError&) {
    return std::nullopt;
  }
  auto ha = h.find(g.id(a));
  if (!ha) return std::nullopt;
  auto comp = strongly_connected_component(h, *ha);
  try {
    return share(h.restricted(comp));
  } catch (const PreconditionError&) {
    return std::nullopt;
  }
}

inline BigInt first_return_count_filtered(const MarkovGraph& g, StateIndex a, std::size_t n,
                                          const std::set<StateIndex>& first_targets) {
  if (n == 1) return first_targets.count(a) ? 1 : 0;
  std::vector<BigInt> v(g.size()), w(g.size());
  for (StateIndex x : first_targets)
    if (x != a) v[x] = 1;
  for (std::size_t len = 2; len < n; ++len) {
    std::fill(w.begin(), w.end(), BigInt(0));
    for (StateIndex x = 0; x < g.size(); ++x) {
      if (x == a || v[x] == 0) continue;
      for (StateIndex y : g.successors(x))
        if (y != a) w[y] += v[x];
    }
    std::swap(v, w);
  }
  BigInt s = 0;
  for (StateIndex x = 0; x < g.size(); ++x)
    if (x != a && v[x] != 0 && g.has_edge(x, a)) s += v[x];
  return s;
}

}  // namespace detail

inline ZStarSplitReport zstar_split_check(const MarkovGraph& g, const LocallyConstantFunction& phi, StateIndex a,
                                          const std::vector<Edge>& E0, const std::vector<Edge>& E1, std::size_t n,
                                          double rel_tol = 1e-12, std::size_t cap = defaults::enumeration_cap) {
  require_same_graph(g, phi);
  auto part = detail::validate_partition(g, a, E0, E1);
  auto L = transfer_matrix(phi);
  auto in = [](const std::set<StateIndex>& s) { return [&s](StateIndex x) { return s.count(x) > 0; }; };
  ZStarSplitReport r;
  r.n = n;
  r.total = std::exp(detail::log_loop_sum(L, a, n, true, {}, cap));
  r.e0 = std::exp(detail::log_loop_sum(L, a, n, true, in(part.t0), cap));
  r.e1 = std::exp(detail::log_loop_sum(L, a, n, true, in(part.t1), cap));
  r.core = std::exp(detail::log_loop_sum(L, a, n, true, in(part.tcore), cap));
  auto sub = [&](const std::vector<Edge>& drop) {
    auto h = detail::split_subgraph(g, a, drop);
    if (!h) return 0.0;
    auto ph = phi.transported(*h);
    return first_return_sum(**h, ph, (*h)->index(g.id(a)), n, cap);
  };
  r.sub0 = sub(E1);
  r.sub1 = sub(E0);
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)}); };
  r.split_residual = rel(r.total, r.e0 + r.e1 + r.core);
  r.identity_residual0 = rel(r.sub0, r.e0 + r.core);
  r.identity_residual1 = rel(r.sub1, r.e1 + r.core);
  r.ok = r.split_residual <= rel_tol && r.identity_residual0 <= rel_tol && r.identity_residual1 <= rel_tol;
  return r;
}

// Zero-potential version in exact integers.
inline ZStarSplitExact zstar_split_exact(const MarkovGraph& g, StateIndex a, const std::vector<Edge>& E0,
                                         const std::vector<Edge>& E1, std::size_t n,
                                         std::size_t cap = defaults::enumeration_cap) {
  check_cap(n, cap);
  auto part = detail::validate_partition(g, a, E0, E1);
  ZStarSplitExact r;
  r.n = n;
  r.total = count_first_return_loops(g, a, n, cap);
  r.e0 = detail::first_return_count_filtered(g, a, n, part.t0);
  r.e1 = detail::first_return_count_filtered(g, a, n, part.t1);
  r.core = detail::first_return_count_filtered(g, a, n, part.tcore);
  auto sub = [&](const std::vector<Edge>& drop) -> BigInt {
    auto h = detail::split_subgraph(g, a, drop);
    if (!h) return 0;
    return count_first_return_loops(**h, (*h)->index(g.id(a)), n, cap);
  };
  r.sub0 = sub(E1);
  r.sub1 = sub(E0);
  r.split_ok = r.total == r.e0 + r.e1 + r.core;
  r.identity_ok = r.sub0 == r.e0 + r.core && r.sub1 == r.e1 + r.core;
  return r;
}

}  // namespace tms
