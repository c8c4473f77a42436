#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tmslab/error.hpp"

namespace tms {

using StateIndex = std::size_t;
using Edge = std::pair<StateIndex, StateIndex>;

class MarkovGraph;

// A finite sequence of states together with its admissibility in the graph
// it was built against.
struct Word {
  std::vector<StateIndex> symbols;
  bool admissible = false;

  std::size_t size() const { return symbols.size(); }
  StateIndex operator[](std::size_t i) const { return symbols[i]; }
  bool operator==(const Word&) const = default;
};

class MarkovGraph {
 public:
  MarkovGraph() = default;

  // States with no outgoing edge are pruned until none remain. Duplicate
  // edges and unknown endpoints are rejected.
  static MarkovGraph from_edges(
      std::vector<std::string> states,
      const std::vector<std::pair<std::string, std::string>>& edges) {
    std::unordered_map<std::string, StateIndex> idx;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i].empty()) throw PreconditionError("empty state identifier at position " + std::to_string(i));
      if (!idx.emplace(states[i], i).second)
        throw PreconditionError("duplicate state identifier '" + states[i] + "' at position " + std::to_string(i));
    }
    std::vector<std::vector<StateIndex>> out(states.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto a = idx.find(edges[e].first);
      auto b = idx.find(edges[e].second);
      if (a == idx.end() || b == idx.end())
        throw PreconditionError("edge " + std::to_string(e) + " (" + edges[e].first + "->" +
                                edges[e].second + ") references an unknown state");
      auto& row = out[a->second];
      if (std::find(row.begin(), row.end(), b->second) != row.end())
        throw PreconditionError("duplicate edge (" + edges[e].first + "->" + edges[e].second +
                                ") at position " + std::to_string(e));
      row.push_back(b->second);
    }
    return from_adjacency(std::move(states), std::move(out));
  }

  static MarkovGraph from_adjacency(std::vector<std::string> states,
                                   std::vector<std::vector<StateIndex>> out) {
    const std::size_t n = states.size();
    std::vector<char> alive(n, 1);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t a = 0; a < n; ++a) {
        if (!alive[a]) continue;
        bool has = std::any_of(out[a].begin(), out[a].end(), [&](StateIndex b) { return alive[b] != 0; });
        if (!has) {
          alive[a] = 0;
          changed = true;
        }
      }
    }
    std::vector<StateIndex> remap(n, n);
    MarkovGraph g;
    for (std::size_t a = 0; a < n; ++a) {
      if (alive[a]) {
        remap[a] = g.ids_.size();
        g.ids_.push_back(std::move(states[a]));
      }
    }
    if (g.ids_.empty()) throw PreconditionError("graph is empty after pruning states without outgoing edges");
    g.out_.resize(g.ids_.size());
    for (std::size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      auto& row = g.out_[remap[a]];
      for (StateIndex b : out[a])
        if (alive[b]) row.push_back(remap[b]);
      std::sort(row.begin(), row.end());
      if (std::adjacent_find(row.begin(), row.end()) != row.end())
        throw PreconditionError("duplicate edge out of state '" + g.ids_[remap[a]] + "'");
    }
    for (std::size_t i = 0; i < g.ids_.size(); ++i) g.index_.emplace(g.ids_[i], i);
    return g;
  }

  static MarkovGraph full_shift(std::size_t n) {
    if (n == 0) throw PreconditionError("full shift needs at least one symbol");
    std::vector<std::string> ids;
    std::vector<std::vector<StateIndex>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back(std::to_string(i + 1));
      out[i].resize(n);
      std::iota(out[i].begin(), out[i].end(), StateIndex{0});
    }
    return from_adjacency(std::move(ids), std::move(out));
  }

  static MarkovGraph golden_mean() {
    return from_adjacency({"1", "2"}, {{0, 1}, {0}});
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& states() const { return ids_; }
  const std::string& id(StateIndex a) const { return ids_.at(a); }

  std::optional<StateIndex> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  StateIndex index(std::string_view id) const {
    auto i = find(id);
    if (!i) throw PreconditionError("unknown state '" + std::string(id) + "'");
    return *i;
  }

  const std::vector<StateIndex>& successors(StateIndex a) const { return out_.at(a); }

  bool has_edge(StateIndex a, StateIndex b) const {
    const auto& row = out_[a];
    return std::binary_search(row.begin(), row.end(), b);
  }

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (const auto& r : out_) c += r.size();
    return c;
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> e;
    for (StateIndex a = 0; a < size(); ++a)
      for (StateIndex b : out_[a]) e.emplace_back(a, b);
    return e;
  }

  bool is_admissible(std::span<const StateIndex> w) const {
    for (StateIndex s : w)
      if (s >= size()) return false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
      if (!has_edge(w[i], w[i + 1])) return false;
    return true;
  }

  // Admissible and closes up: last symbol has an edge back to the first.
  bool is_loop(std::span<const StateIndex> w) const {
    return !w.empty() && is_admissible(w) && has_edge(w.back(), w.front());
  }

  Word word(std::vector<StateIndex> symbols) const {
    bool ok = is_admissible(symbols);
    return Word{std::move(symbols), ok};
  }

  Word word_from_ids(const std::vector<std::string>& ids) const {
    std::vector<StateIndex> s;
    s.reserve(ids.size());
    for (const auto& i : ids) s.push_back(index(i));
    return word(std::move(s));
  }

  std::string format(std::span<const StateIndex> w) const {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i) s += ',';
      s += ids_[w[i]];
    }
    return s;
  }
  std::string format(const Word& w) const { return format(std::span<const StateIndex>(w.symbols)); }

  // Keeps the listed states and edges (in this graph's indexing); prunes.
  MarkovGraph restricted(const std::vector<char>& keep_state,
                         const std::vector<Edge>& drop_edges = {}) const {
    std::vector<std::string> ids;
    std::vector<StateIndex> remap(size(), size());
    for (StateIndex a = 0; a < size(); ++a)
      if (keep_state[a]) {
        remap[a] = ids.size();
        ids.push_back(ids_[a]);
      }
    std::vector<std::vector<StateIndex>> out(ids.size());
    for (StateIndex a = 0; a < size(); ++a) {
      if (!keep_state[a]) continue;
      for (StateIndex b : out_[a]) {
        if (!keep_state[b]) continue;
        if (std::find(drop_edges.begin(), drop_edges.end(), Edge{a, b}) != drop_edges.end()) continue;
        out[remap[a]].push_back(remap[b]);
      }
    }
    return from_adjacency(std::move(ids), std::move(out));
  }

  bool operator==(const MarkovGraph& o) const { return ids_ == o.ids_ && out_ == o.out_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, StateIndex> index_;
  std::vector<std::vector<StateIndex>> out_;
};

namespace detail {

inline std::vector<char> reach(const MarkovGraph& g, StateIndex a, bool forward) {
  const std::size_t n = g.size();
  std::vector<std::vector<StateIndex>> in;
  if (!forward) {
    in.resize(n);
    for (auto [u, v] : g.edges()) in[v].push_back(u);
  }
  std::vector<char> seen(n, 0);
  std::vector<StateIndex> stack{a};
  seen[a] = 1;
  while (!stack.empty()) {
    StateIndex u = stack.back();
    stack.pop_back();
    for (StateIndex v : forward ? g.successors(u) : in[u])
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
  return seen;
}

}  // namespace detail

inline std::vector<char> strongly_connected_component(const MarkovGraph& g, StateIndex a) {
  auto f = detail::reach(g, a, true);
  auto b = detail::reach(g, a, false);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<char>(f[i] && b[i]);
  return f;
}

inline bool is_strongly_connected(const MarkovGraph& g) {
  auto c = strongly_connected_component(g, 0);
  return std::all_of(c.begin(), c.end(), [](char x) { return x != 0; });
}

namespace detail {

inline std::vector<std::size_t> bfs_levels(const MarkovGraph& g) {
  std::vector<std::size_t> level(g.size(), static_cast<std::size_t>(-1));
  std::deque<StateIndex> q{0};
  level[0] = 0;
  while (!q.empty()) {
    StateIndex u = q.front();
    q.pop_front();
    for (StateIndex v : g.successors(u))
      if (level[v] == static_cast<std::size_t>(-1)) {
        level[v] = level[u] + 1;
        q.push_back(v);
      }
  }
  return level;
}

}  // namespace detail

inline std::size_t period(const MarkovGraph& g) {
  if (!is_strongly_connected(g)) throw PreconditionError("period: graph is not strongly connected");
  auto level = detail::bfs_levels(g);
  std::size_t d = 0;
  for (auto [u, v] : g.edges()) {
    long long diff = static_cast<long long>(level[u]) + 1 - static_cast<long long>(level[v]);
    d = std::gcd(d, static_cast<std::size_t>(diff < 0 ? -diff : diff));
  }
  return d;
}

// Graph whose states are the admissible words of a fixed length over a base
// graph, each state id being the comma-joined base ids.
struct BlockGraph {
  MarkovGraph graph;
  std::size_t order = 1;
  std::vector<std::vector<StateIndex>> words;
  std::map<std::vector<StateIndex>, StateIndex> lookup;

  std::optional<StateIndex> find(std::span<const StateIndex> w) const {
    auto it = lookup.find(std::vector<StateIndex>(w.begin(), w.end()));
    if (it == lookup.end()) return std::nullopt;
    return it->second;
  }
};

// All admissible words of length m, in lexicographic index order.
inline std::vector<std::vector<StateIndex>> admissible_words(const MarkovGraph& g, std::size_t m) {
  std::vector<std::vector<StateIndex>> cur;
  for (StateIndex a = 0; a < g.size(); ++a) cur.push_back({a});
  for (std::size_t len = 1; len < m; ++len) {
    std::vector<std::vector<StateIndex>> next;
    for (const auto& w : cur)
      for (StateIndex b : g.successors(w.back())) {
        next.push_back(w);
        next.back().push_back(b);
      }
    cur = std::move(next);
  }
  return cur;
}

inline BlockGraph higher_block(const MarkovGraph& g, std::size_t m) {
  if (m == 0) throw PreconditionError("higher_block: m must be >= 1");
  BlockGraph bg;
  bg.order = m;
  bg.words = admissible_words(g, m);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < bg.words.size(); ++i) {
    bg.lookup.emplace(bg.words[i], i);
    ids.push_back(g.format(bg.words[i]));
  }
  std::vector<std::vector<StateIndex>> out(bg.words.size());
  std::vector<StateIndex> buf(m);
  for (std::size_t i = 0; i < bg.words.size(); ++i) {
    const auto& w = bg.words[i];
    std::copy(w.begin() + 1, w.end(), buf.begin());
    for (StateIndex b : g.successors(w.back())) {
      buf[m - 1] = b;
      out[i].push_back(bg.lookup.at(buf));
    }
  }
  bg.graph = MarkovGraph::from_adjacency(std::move(ids), std::move(out));
  return bg;
}

struct SpectralComponent {
  std::size_t index = 0;
  std::vector<StateIndex> states;
  // States are the admissible length-p words starting in this class; edge
  // when the last letter of one word leads to the first letter of the next.
  BlockGraph recoded;
};

struct SpectralDecomposition {
  std::size_t period = 1;
  std::vector<std::size_t> class_of;
  std::vector<SpectralComponent> components;
};

inline SpectralDecomposition spectral_decomposition(const MarkovGraph& g) {
  SpectralDecomposition sd;
  sd.period = period(g);
  const std::size_t p = sd.period;
  auto level = detail::bfs_levels(g);
  sd.class_of.resize(g.size());
  for (StateIndex a = 0; a < g.size(); ++a) sd.class_of[a] = level[a] % p;
  auto words = admissible_words(g, p);
  for (std::size_t i = 0; i < p; ++i) {
    SpectralComponent c;
    c.index = i;
    for (StateIndex a = 0; a < g.size(); ++a)
      if (sd.class_of[a] == i) c.states.push_back(a);
    auto& bg = c.recoded;
    bg.order = p;
    std::vector<std::string> ids;
    for (const auto& w : words)
      if (sd.class_of[w[0]] == i) {
        bg.lookup.emplace(w, bg.words.size());
        bg.words.push_back(w);
        ids.push_back(g.format(w));
      }
    std::vector<std::vector<StateIndex>> out(bg.words.size());
    for (std::size_t u = 0; u < bg.words.size(); ++u)
      for (std::size_t v = 0; v < bg.words.size(); ++v)
        if (g.has_edge(bg.words[u].back(), bg.words[v].front())) out[u].push_back(v);
    bg.graph = MarkovGraph::from_adjacency(std::move(ids), std::move(out));
    sd.components.push_back(std::move(c));
  }
  return sd;
}

}  // namespace tms
