#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tmslab/config.hpp"
#include "tmslab/error.hpp"
#include "tmslab/graph.hpp"
#include "tmslab/observable.hpp"
#include "tmslab/transfer.hpp"

namespace tms {

enum class MeasureKind { parry, rpf, tilted, bernoulli, periodic, subgraph, markov };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::parry: return "parry";
    case MeasureKind::rpf: return "rpf";
    case MeasureKind::tilted: return "tilted";
    case MeasureKind::bernoulli: return "bernoulli";
    case MeasureKind::periodic: return "periodic";
    case MeasureKind::subgraph: return "subgraph";
    case MeasureKind::markov: return "markov";
  }
  return "markov";
}

// Shift-invariant Markov measure on a block alphabet: each letter is an
// admissible word of length `order` in the base graph, and P moves one
// step along the base sequence. The alphabet may be a subset of all
// words (the support).
class MarkovMeasure {
 public:
  GraphPtr base;
  std::size_t order = 1;
  std::vector<std::vector<StateIndex>> alphabet;
  SparseRows P;
  std::vector<double> pi;
  MeasureKind kind = MeasureKind::markov;
  std::string provenance = "markov";
  std::size_t clamped = 0;

  static MarkovMeasure make(GraphPtr base, std::size_t order, std::vector<std::vector<StateIndex>> alphabet,
                            SparseRows P, std::vector<double> pi, MeasureKind kind, std::string provenance) {
    MarkovMeasure mu;
    mu.base = std::move(base);
    mu.order = order;
    mu.alphabet = std::move(alphabet);
    mu.P = std::move(P);
    mu.pi = std::move(pi);
    mu.kind = kind;
    mu.provenance = std::move(provenance);
    mu.finish();
    return mu;
  }

  std::size_t size() const { return alphabet.size(); }

  std::optional<std::size_t> find(std::span<const StateIndex> w) const {
    auto it = index_.find(std::vector<StateIndex>(w.begin(), w.end()));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  double transition(std::size_t a, std::size_t b) const {
    for (auto [j, v] : P[a])
      if (j == b) return v;
    return 0.0;
  }

  double stationarity_residual() const {
    std::vector<double> r(size(), 0.0);
    for (std::size_t a = 0; a < size(); ++a)
      for (auto [b, v] : P[a]) r[b] += pi[a] * v;
    double e = 0;
    for (std::size_t a = 0; a < size(); ++a) e = std::max(e, std::abs(r[a] - pi[a]));
    return e;
  }

  double row_sum_residual() const {
    double e = 0;
    for (const auto& row : P) {
      KahanSum s;
      for (auto [b, v] : row) s.add(v);
      e = std::max(e, std::abs(s.value() - 1.0));
    }
    return e;
  }

  // Mass of the cylinder of a base word.
  double cylinder_mass(std::span<const StateIndex> w) const {
    if (w.empty()) return 1.0;
    if (w.size() <= order) {
      KahanSum s;
      for (std::size_t a = 0; a < size(); ++a)
        if (std::equal(w.begin(), w.end(), alphabet[a].begin())) s.add(pi[a]);
      return s.value();
    }
    auto s0 = find(w.subspan(0, order));
    if (!s0) return 0.0;
    double p = pi[*s0];
    std::size_t cur = *s0;
    for (std::size_t j = 1; j + order <= w.size(); ++j) {
      auto nx = find(w.subspan(j, order));
      if (!nx) return 0.0;
      p *= transition(cur, *nx);
      if (p == 0) return 0.0;
      cur = *nx;
    }
    return p;
  }

  // Same measure on the alphabet of its support words of length k > order.
  MarkovMeasure lifted(std::size_t k) const {
    if (k <= order) return *this;
    std::vector<std::vector<StateIndex>> words;
    std::vector<std::size_t> last_block;
    std::vector<double> mass;
    std::vector<std::pair<std::vector<StateIndex>, std::pair<std::size_t, double>>> frontier;
    for (std::size_t a = 0; a < size(); ++a)
      if (pi[a] > 0) frontier.push_back({alphabet[a], {a, pi[a]}});
    for (std::size_t len = order; len < k; ++len) {
      decltype(frontier) next;
      for (const auto& [w, st] : frontier)
        for (auto [b, v] : P[st.first]) {
          if (v <= 0) continue;
          auto w2 = w;
          w2.push_back(alphabet[b].back());
          next.push_back({std::move(w2), {b, st.second * v}});
        }
      frontier = std::move(next);
    }
    std::sort(frontier.begin(), frontier.end());
    MarkovMeasure out;
    out.base = base;
    out.order = k;
    out.kind = kind;
    out.provenance = provenance;
    out.clamped = clamped;
    for (auto& [w, st] : frontier) {
      out.alphabet.push_back(w);
      last_block.push_back(st.first);
      out.pi.push_back(st.second);
    }
    out.build_index();
    out.P.resize(out.size());
    std::vector<StateIndex> buf(k);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& w = out.alphabet[i];
      std::copy(w.begin() + 1, w.end(), buf.begin());
      for (auto [b, v] : P[last_block[i]]) {
        if (v <= 0) continue;
        buf[k - 1] = alphabet[b].back();
        auto j = out.find(buf);
        if (j) out.P[i].emplace_back(*j, v);
      }
    }
    return out;
  }

  void validate(double tol = 1e-12) const {
    if (alphabet.empty()) throw PreconditionError("measure has empty alphabet");
    if (pi.size() != size() || P.size() != size()) throw PreconditionError("measure: size mismatch");
    for (std::size_t a = 0; a < size(); ++a) {
      if (alphabet[a].size() != order || !base->is_admissible(alphabet[a]))
        throw PreconditionError("measure alphabet word " + base->format(alphabet[a]) + " is not admissible");
      for (auto [b, v] : P[a]) {
        if (v < 0) throw PreconditionError("negative transition probability");
        if (v > 0 && !step_ok(a, b))
          throw PreconditionError("transition " + base->format(alphabet[a]) + " -> " + base->format(alphabet[b]) +
                                  " is not an edge");
      }
    }
    if (row_sum_residual() > tol) throw NumericError("measure rows are not stochastic");
    KahanSum s;
    for (double v : pi) {
      if (v < 0) throw NumericError("negative stationary mass");
      s.add(v);
    }
    if (std::abs(s.value() - 1) > tol) throw NumericError("stationary vector does not sum to 1");
    if (stationarity_residual() > tol)
      throw NumericError("stationary vector residual " + std::to_string(stationarity_residual()));
  }

 private:
  std::map<std::vector<StateIndex>, std::size_t> index_;

  void build_index() {
    index_.clear();
    for (std::size_t a = 0; a < size(); ++a) index_.emplace(alphabet[a], a);
  }

  bool step_ok(std::size_t a, std::size_t b) const {
    const auto& x = alphabet[a];
    const auto& y = alphabet[b];
    if (!base->has_edge(x.back(), y.back())) return false;
    return std::equal(x.begin() + 1, x.end(), y.begin());
  }

  void finish() {
    build_index();
    for (auto& row : P) {
      std::erase_if(row, [&](const auto& e) {
        if (e.second > 0 && e.second < defaults::prob_clamp) {
          ++clamped;
          return true;
        }
        return e.second == 0.0;
      });
      KahanSum s;
      for (auto [b, v] : row) s.add(v);
      if (!(s.value() > 0)) throw PreconditionError("measure row with no outgoing mass");
      for (auto& [b, v] : row) v /= s.value();
    }
    if (pi.empty()) {
      auto solve = detail::perron_solve(detail::transpose(P), defaults::eigen_tol, defaults::eigen_max_iter, false);
      pi = solve.v;
    }
    KahanSum s;
    for (double v : pi) s.add(v);
    for (double& v : pi) v /= s.value();
    validate(1e-10);
  }
};

inline double entropy(const MarkovMeasure& mu) {
  KahanSum s;
  for (std::size_t a = 0; a < mu.size(); ++a)
    for (auto [b, v] : mu.P[a])
      if (v >= defaults::prob_clamp) s.add(-mu.pi[a] * v * std::log(v));
  return s.value();
}

inline double integrate(const MarkovMeasure& mu, const LocallyConstantFunction& psi) {
  require_same_graph(*mu.base, psi);
  const std::size_t m = psi.memory();
  if (m > mu.order + 1) return integrate(mu.lifted(m - 1), psi);
  KahanSum s;
  if (m <= mu.order) {
    for (std::size_t a = 0; a < mu.size(); ++a) s.add(mu.pi[a] * psi.value(mu.alphabet[a]));
    return s.value();
  }
  std::vector<StateIndex> w(m);
  for (std::size_t a = 0; a < mu.size(); ++a) {
    std::copy(mu.alphabet[a].begin(), mu.alphabet[a].end(), w.begin());
    for (auto [b, v] : mu.P[a]) {
      w[m - 1] = mu.alphabet[b].back();
      s.add(mu.pi[a] * v * psi.value(w));
    }
  }
  return s.value();
}

inline double measure_pressure(const MarkovMeasure& mu, const LocallyConstantFunction& phi) {
  return entropy(mu) + integrate(mu, phi);
}

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(15);
  os << v;
  return os.str();
}

// RPF measure of phi on its own graph; periodic graphs allowed.
inline MarkovMeasure rpf_on_graph(const LocallyConstantFunction& phi, MeasureKind kind, std::string label) {
  auto L = transfer_matrix(phi);
  auto d = perron_data_irreducible(L);
  const double lam = std::exp(d.log_lambda - L.shift);
  SparseRows P(L.size());
  std::vector<double> pi(L.size());
  for (std::size_t a = 0; a < L.size(); ++a) {
    pi[a] = d.right[a] * d.left[a];
    for (auto [b, w] : L.weight[a]) P[a].emplace_back(b, w * d.right[b] / (lam * d.right[a]));
  }
  return MarkovMeasure::make(L.base, L.order(), L.blocks.words, std::move(P), std::move(pi), kind, std::move(label));
}

}  // namespace detail

inline MarkovMeasure rpf_measure(const LocallyConstantFunction& phi) {
  return detail::rpf_on_graph(phi, MeasureKind::rpf, "rpf");
}

inline MarkovMeasure rpf_measure(const MarkovGraph& g, const LocallyConstantFunction& phi) {
  require_same_graph(g, phi);
  return rpf_measure(phi);
}

inline MarkovMeasure parry_measure(const GraphPtr& g) {
  return detail::rpf_on_graph(LocallyConstantFunction::constant(g, 0.0), MeasureKind::parry, "parry");
}

inline MarkovMeasure tilted_equilibrium(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                        double t) {
  return detail::rpf_on_graph(phi + t * psi, MeasureKind::tilted, "tilted(t=" + detail::fmt_num(t) + ")");
}

// Order-1 Markov measure from a transition matrix on the states of g.
inline MarkovMeasure markov_measure(const GraphPtr& g, const std::vector<std::vector<double>>& P,
                                    std::string label = "markov") {
  if (P.size() != g->size()) throw PreconditionError("transition matrix size mismatch");
  SparseRows rows(g->size());
  for (StateIndex a = 0; a < g->size(); ++a) {
    if (P[a].size() != g->size()) throw PreconditionError("transition matrix size mismatch");
    for (StateIndex b = 0; b < g->size(); ++b)
      if (P[a][b] != 0) {
        if (!g->has_edge(a, b)) throw PreconditionError("transition off the graph edges");
        rows[a].emplace_back(b, P[a][b]);
      }
  }
  std::vector<std::vector<StateIndex>> alpha;
  for (StateIndex a = 0; a < g->size(); ++a) alpha.push_back({a});
  return MarkovMeasure::make(g, 1, std::move(alpha), std::move(rows), {}, MeasureKind::markov, std::move(label));
}

inline MarkovMeasure bernoulli_family(const GraphPtr& g, const std::vector<double>& probs) {
  const std::size_t n = g->size();
  if (g->edge_count() != n * n) throw PreconditionError("bernoulli measures need a full shift");
  if (probs.size() != n) throw PreconditionError("bernoulli: need one probability per symbol");
  double s = 0;
  for (double p : probs) {
    if (!(p > 0) || p > 1) throw PreconditionError("bernoulli probabilities must lie in (0,1]");
    s += p;
  }
  if (std::abs(s - 1) > 1e-12) throw PreconditionError("bernoulli probabilities must sum to 1");
  std::string label = "bernoulli(";
  for (std::size_t i = 0; i < n; ++i) label += (i ? ";" : "") + detail::fmt_num(probs[i]);
  label += ")";
  std::vector<std::vector<double>> P(n, probs);
  auto mu = markov_measure(g, P, label);
  mu.kind = MeasureKind::bernoulli;
  return mu;
}

// Equidistribution on the orbit of a loop. The block order is the length of
// the primitive root, which makes the rotations distinct letters.
inline MarkovMeasure periodic_measure(const GraphPtr& g, std::span<const StateIndex> cycle) {
  if (!g->is_loop(cycle)) throw PreconditionError("periodic_measure: not an admissible loop");
  std::size_t n = cycle.size(), d = n;
  for (std::size_t q = 1; q < n; ++q) {
    if (n % q) continue;
    bool rep = true;
    for (std::size_t i = q; i < n && rep; ++i) rep = cycle[i] == cycle[i - q];
    if (rep) {
      d = q;
      break;
    }
  }
  std::vector<std::vector<StateIndex>> alpha(d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t i = 0; i < d; ++i) alpha[r].push_back(cycle[(r + i) % d]);
  SparseRows P(d);
  for (std::size_t r = 0; r < d; ++r) P[r].emplace_back((r + 1) % d, 1.0);
  std::vector<double> pi(d, 1.0 / static_cast<double>(d));
  auto mu = MarkovMeasure::make(g, d, std::move(alpha), std::move(P), std::move(pi), MeasureKind::periodic,
                                "periodic(" + g->format(cycle.subspan(0, d)) + ")");
  return mu;
}

// Equilibrium measure of phi restricted to a strongly connected subgraph,
// viewed as a measure on the ambient shift.
inline MarkovMeasure subgraph_measure(const GraphPtr& g, const GraphPtr& sub,
                                      const std::optional<LocallyConstantFunction>& phi = std::nullopt,
                                      std::string label = "") {
  if (!is_strongly_connected(*sub)) throw PreconditionError("subgraph_measure: subgraph not strongly connected");
  for (auto [u, v] : sub->edges()) {
    auto a = g->find(sub->id(u)), b = g->find(sub->id(v));
    if (!a || !b || !g->has_edge(*a, *b)) throw PreconditionError("subgraph_measure: not a subgraph");
  }
  auto phis = phi ? phi->transported(sub) : LocallyConstantFunction::constant(sub, 0.0);
  auto inner = detail::rpf_on_graph(phis, MeasureKind::subgraph, "");
  std::vector<std::vector<StateIndex>> alpha;
  for (const auto& w : inner.alphabet) {
    std::vector<StateIndex> v;
    for (StateIndex s : w) v.push_back(g->index(sub->id(s)));
    alpha.push_back(std::move(v));
  }
  if (label.empty()) {
    label = "subgraph(";
    for (StateIndex s = 0; s < sub->size(); ++s) label += (s ? ";" : "") + sub->id(s);
    label += ")";
  }
  return MarkovMeasure::make(g, inner.order, std::move(alpha), inner.P, inner.pi, MeasureKind::subgraph,
                             std::move(label));
}

}  // namespace tms
