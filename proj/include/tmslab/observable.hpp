#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmslab/config.hpp"
#include "tmslab/error.hpp"
#include "tmslab/graph.hpp"
#include "tmslab/loops.hpp"

namespace tms {

using GraphPtr = std::shared_ptr<const MarkovGraph>;

inline GraphPtr share(MarkovGraph g) { return std::make_shared<const MarkovGraph>(std::move(g)); }

// Function of the first m coordinates, stored as a dense table over S^m in
// mixed radix |S|. Only entries at admissible words are meaningful.
class LocallyConstantFunction {
 public:
  LocallyConstantFunction(GraphPtr g, std::size_t memory, double default_value = 0.0)
      : g_(std::move(g)), m_(memory), default_(default_value) {
    if (!g_) throw PreconditionError("observable needs a graph");
    if (m_ == 0) throw PreconditionError("observable memory must be >= 1");
    std::size_t n = g_->size(), sz = 1;
    for (std::size_t i = 0; i < m_; ++i) {
      if (sz > defaults::max_table_entries / n)
        throw PreconditionError("observable table too large (memory " + std::to_string(m_) + ")");
      sz *= n;
    }
    table_.assign(sz, default_);
  }

  static LocallyConstantFunction constant(GraphPtr g, double c) { return {std::move(g), 1, c}; }

  static LocallyConstantFunction indicator(GraphPtr g, std::vector<StateIndex> w) {
    LocallyConstantFunction f(std::move(g), w.size(), 0.0);
    f.set(w, 1.0);
    return f;
  }

  const MarkovGraph& graph() const { return *g_; }
  const GraphPtr& graph_ptr() const { return g_; }
  std::size_t memory() const { return m_; }
  double default_value() const { return default_; }
  const std::vector<double>& table() const { return table_; }

  std::size_t slot(std::span<const StateIndex> w) const {
    std::size_t idx = 0, n = g_->size();
    for (std::size_t i = 0; i < m_; ++i) idx = idx * n + w[i];
    return idx;
  }

  double value(std::span<const StateIndex> w) const { return table_[slot(w)]; }
  void set(std::span<const StateIndex> w, double v) {
    if (w.size() != m_) throw PreconditionError("observable word length must equal memory");
    table_[slot(w)] = v;
  }

  double evaluate(const Word& w) const {
    if (!w.admissible || !g_->is_admissible(w.symbols)) throw PreconditionError("evaluate: inadmissible word");
    if (w.size() < m_) throw PreconditionError("evaluate: word shorter than memory");
    return value(w.symbols);
  }

  // visit(word, value) for every admissible m-word.
  template <class F>
  void for_each_word(F&& visit) const {
    for (const auto& w : admissible_words(*g_, m_)) visit(std::span<const StateIndex>(w), value(w));
  }

  double sup_norm() const {
    double s = 0;
    for_each_word([&](auto, double v) { s = std::max(s, std::abs(v)); });
    return s;
  }

  bool is_zero() const {
    bool z = true;
    for_each_word([&](auto, double v) { z = z && v == 0.0; });
    return z;
  }

  LocallyConstantFunction promoted(std::size_t m) const {
    if (m < m_) throw PreconditionError("cannot promote to smaller memory");
    LocallyConstantFunction r(g_, m, default_);
    std::size_t div = r.table_.size() / table_.size();
    for (std::size_t i = 0; i < r.table_.size(); ++i) r.table_[i] = table_[i / div];
    return r;
  }

  // psi o sigma as a memory-(m+1) function.
  LocallyConstantFunction shifted() const {
    LocallyConstantFunction r(g_, m_ + 1, default_);
    for (std::size_t i = 0; i < r.table_.size(); ++i) r.table_[i] = table_[i % table_.size()];
    return r;
  }

  // Same values on a graph whose ids are a subset of ours.
  LocallyConstantFunction transported(GraphPtr target) const {
    LocallyConstantFunction r(target, m_, default_);
    std::vector<StateIndex> src(m_);
    for (const auto& w : admissible_words(*target, m_)) {
      for (std::size_t i = 0; i < m_; ++i) src[i] = g_->index(target->id(w[i]));
      r.set(w, value(src));
    }
    return r;
  }

  LocallyConstantFunction map(const std::function<double(double)>& f) const {
    LocallyConstantFunction r = *this;
    for (auto& v : r.table_) v = f(v);
    r.default_ = f(default_);
    return r;
  }

  friend LocallyConstantFunction combine(const LocallyConstantFunction& a, const LocallyConstantFunction& b,
                                         const std::function<double(double, double)>& op) {
    if (a.g_ != b.g_ && !(*a.g_ == *b.g_)) throw PreconditionError("observables live on different graphs");
    std::size_t m = std::max(a.m_, b.m_);
    auto pa = a.promoted(m), pb = b.promoted(m);
    for (std::size_t i = 0; i < pa.table_.size(); ++i) pa.table_[i] = op(pa.table_[i], pb.table_[i]);
    pa.default_ = op(a.default_, b.default_);
    return pa;
  }

  friend LocallyConstantFunction operator+(const LocallyConstantFunction& a, const LocallyConstantFunction& b) {
    return combine(a, b, std::plus<>{});
  }
  friend LocallyConstantFunction operator-(const LocallyConstantFunction& a, const LocallyConstantFunction& b) {
    return combine(a, b, std::minus<>{});
  }
  friend LocallyConstantFunction operator+(const LocallyConstantFunction& a, double c) {
    return a.map([c](double v) { return v + c; });
  }
  friend LocallyConstantFunction operator*(double c, const LocallyConstantFunction& a) {
    return a.map([c](double v) { return c * v; });
  }
  friend LocallyConstantFunction operator/(const LocallyConstantFunction& a, double c) {
    return a.map([c](double v) { return v / c; });
  }

 private:
  GraphPtr g_;
  std::size_t m_;
  double default_;
  std::vector<double> table_;
};

inline double birkhoff_sum_on_cycle(const LocallyConstantFunction& psi, std::span<const StateIndex> cycle) {
  const auto& g = psi.graph();
  if (!g.is_loop(cycle)) throw PreconditionError("birkhoff_sum_on_cycle: not an admissible loop");
  const std::size_t n = cycle.size(), m = psi.memory();
  std::vector<StateIndex> w(m);
  double s = 0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) w[i] = cycle[(k + i) % n];
    s += psi.value(w);
  }
  return s;
}

inline double birkhoff_sum_on_cycle(const LocallyConstantFunction& psi, const Word& cycle) {
  return birkhoff_sum_on_cycle(psi, std::span<const StateIndex>(cycle.symbols));
}

struct HolderData {
  double beta = 1.0;
  double sup_norm = 0;
  double seminorm = 0;
  double norm = 0;
};

namespace detail {

// Largest |psi(x)-psi(y)| over admissible m-words agreeing on exactly the
// first t symbols.
inline double max_split_difference(const LocallyConstantFunction& psi, std::size_t t) {
  using Key = std::vector<StateIndex>;
  std::map<Key, std::map<StateIndex, std::pair<double, double>>> groups;
  psi.for_each_word([&](std::span<const StateIndex> w, double v) {
    auto& mm = groups[Key(w.begin(), w.begin() + t)];
    auto [it, fresh] = mm.try_emplace(w[t], v, v);
    if (!fresh) {
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  });
  double best = 0;
  for (const auto& [prefix, by_sym] : groups)
    for (const auto& [s1, r1] : by_sym)
      for (const auto& [s2, r2] : by_sym)
        if (s1 != s2) best = std::max(best, r1.second - r2.first);
  return best;
}

}  // namespace detail

inline HolderData holder_norm(const LocallyConstantFunction& psi, double beta = defaults::holder_beta) {
  if (!(beta > 0)) throw PreconditionError("holder_norm: beta must be positive");
  HolderData h;
  h.beta = beta;
  h.sup_norm = psi.sup_norm();
  for (std::size_t t = 0; t < psi.memory(); ++t)
    h.seminorm = std::max(h.seminorm, detail::max_split_difference(psi, t) * std::exp(beta * static_cast<double>(t)));
  h.norm = h.sup_norm + h.seminorm;
  return h;
}

// sup |psi(x)-psi(y)| over x,y agreeing on the first n coordinates.
inline double oscillation(const LocallyConstantFunction& psi, std::size_t n) {
  if (n >= psi.memory()) return 0.0;
  std::map<std::vector<StateIndex>, std::pair<double, double>> groups;
  psi.for_each_word([&](std::span<const StateIndex> w, double v) {
    auto [it, fresh] = groups.try_emplace(std::vector<StateIndex>(w.begin(), w.begin() + n), v, v);
    if (!fresh) {
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  });
  double o = 0;
  for (const auto& [k, r] : groups) o = std::max(o, r.second - r.first);
  return o;
}

inline LocallyConstantFunction coboundary(const LocallyConstantFunction& u, double c = 0.0) {
  return u.promoted(u.memory() + 1) - u.shifted() + c;
}

inline LocallyConstantFunction small_sigma_family(const LocallyConstantFunction& psi, std::size_t n) {
  if (n == 0) throw PreconditionError("small_sigma_family: n must be >= 1");
  if (psi.is_zero()) throw PreconditionError("small_sigma_family: psi is identically zero");
  return psi / static_cast<double>(n) + (psi.promoted(psi.memory() + 1) - psi.shifted());
}

struct CohomologyReport {
  bool constant = true;
  double average = 0;
  std::size_t cycles_checked = 0;
  std::size_t max_length = 0;
  std::optional<Word> witness_a, witness_b;
  double average_a = 0, average_b = 0;
  std::string note;
};

inline CohomologyReport cohomology_to_constant_test(const LocallyConstantFunction& psi, std::size_t N,
                                                    double tol = 1e-12,
                                                    std::size_t cap = defaults::enumeration_cap) {
  const auto& g = psi.graph();
  check_cap(N, cap);
  if (!is_strongly_connected(g)) throw PreconditionError("cohomology test: graph not strongly connected");
  CohomologyReport r;
  r.max_length = N;
  bool have_ref = false;
  Word ref;
  for (std::size_t n = 1; n <= N && r.constant; ++n) {
    for (StateIndex a = 0; a < g.size() && r.constant; ++a) {
      for_each_loop(g, a, n, [&](std::span<const StateIndex> c) {
        if (!r.constant) return;
        ++r.cycles_checked;
        double avg = birkhoff_sum_on_cycle(psi, c) / static_cast<double>(n);
        if (!have_ref) {
          have_ref = true;
          ref = Word{{c.begin(), c.end()}, true};
          r.average = avg;
        } else if (std::abs(avg - r.average) > tol * std::max(1.0, std::abs(r.average))) {
          r.constant = false;
          r.witness_a = ref;
          r.average_a = r.average;
          r.witness_b = Word{{c.begin(), c.end()}, true};
          r.average_b = avg;
        }
      }, false, cap);
    }
  }
  r.note = r.constant ? "all cycle averages agree up to length " + std::to_string(N) + " (evidence, not proof)"
                      : "cycle averages differ";
  return r;
}

}  // namespace tms
