#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <vector>

#include "tmslab/config.hpp"
#include "tmslab/error.hpp"
#include "tmslab/graph.hpp"

namespace tms {

using BigInt = boost::multiprecision::cpp_int;

inline void check_cap(std::size_t n, std::size_t cap) {
  if (n > cap) throw CapExceeded(n, cap);
}

// Calls visit(std::span<const StateIndex>) for every loop (a, x1, ..., x_{n-1})
// of length n based at a; with first_return, the x_i avoid a.
template <class Visit>
void for_each_loop(const MarkovGraph& g, StateIndex a, std::size_t n, Visit&& visit,
                   bool first_return = false, std::size_t cap = defaults::enumeration_cap) {
  check_cap(n, cap);
  if (n == 0) throw PreconditionError("loop length must be >= 1");
  std::vector<StateIndex> path{a};
  path.reserve(n);
  std::vector<std::size_t> next{0};
  while (!path.empty()) {
    if (path.size() == n) {
      if (g.has_edge(path.back(), a)) visit(std::span<const StateIndex>(path));
      path.pop_back();
      next.pop_back();
      continue;
    }
    const auto& succ = g.successors(path.back());
    std::size_t& i = next.back();
    while (i < succ.size() && first_return && succ[i] == a) ++i;
    if (i == succ.size()) {
      path.pop_back();
      next.pop_back();
      continue;
    }
    StateIndex s = succ[i++];
    path.push_back(s);
    next.push_back(0);
  }
}

inline std::vector<Word> enumerate_cycles(const MarkovGraph& g, StateIndex a, std::size_t n,
                                          std::size_t cap = defaults::enumeration_cap) {
  std::vector<Word> out;
  for_each_loop(
      g, a, n,
      [&](std::span<const StateIndex> w) { out.push_back(Word{{w.begin(), w.end()}, true}); }, false,
      cap);
  return out;
}

// f_1..f_n at a; entry k-1 holds f_k.
inline std::vector<BigInt> first_return_counts(const MarkovGraph& g, StateIndex a, std::size_t n,
                                               std::size_t cap = defaults::enumeration_cap) {
  check_cap(n, cap);
  std::vector<BigInt> f;
  f.reserve(n);
  if (n == 0) return f;
  f.push_back(g.has_edge(a, a) ? 1 : 0);
  std::vector<BigInt> v(g.size()), w(g.size());
  for (StateIndex x : g.successors(a))
    if (x != a) v[x] = 1;
  for (std::size_t len = 2; len <= n; ++len) {
    BigInt back = 0;
    for (StateIndex x = 0; x < g.size(); ++x)
      if (x != a && v[x] != 0 && g.has_edge(x, a)) back += v[x];
    f.push_back(back);
    std::fill(w.begin(), w.end(), BigInt(0));
    for (StateIndex x = 0; x < g.size(); ++x) {
      if (x == a || v[x] == 0) continue;
      for (StateIndex y : g.successors(x))
        if (y != a) w[y] += v[x];
    }
    std::swap(v, w);
  }
  return f;
}

inline BigInt count_first_return_loops(const MarkovGraph& g, StateIndex a, std::size_t n,
                                       std::size_t cap = defaults::enumeration_cap) {
  if (n == 0) throw PreconditionError("loop length must be >= 1");
  return first_return_counts(g, a, n, cap).back();
}

// (T^k)_{aa} for k = 0..n.
inline std::vector<BigInt> cycle_counts(const MarkovGraph& g, StateIndex a, std::size_t n,
                                        std::size_t cap = defaults::enumeration_cap) {
  check_cap(n, cap);
  std::vector<BigInt> z{1};
  std::vector<BigInt> v(g.size()), w(g.size());
  v[a] = 1;
  for (std::size_t k = 1; k <= n; ++k) {
    std::fill(w.begin(), w.end(), BigInt(0));
    for (StateIndex x = 0; x < g.size(); ++x) {
      if (v[x] == 0) continue;
      for (StateIndex y : g.successors(x)) w[y] += v[x];
    }
    std::swap(v, w);
    z.push_back(v[a]);
  }
  return z;
}

inline BigInt count_cycles(const MarkovGraph& g, StateIndex a, std::size_t n,
                           std::size_t cap = defaults::enumeration_cap) {
  return cycle_counts(g, a, n, cap).back();
}

}  // namespace tms
