#pragma once

// Independent reference computations used by the unit tests. Nothing here
// calls into the library's counting or eigen code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tmslab/graph.hpp"

namespace oracle {

using Mat = std::vector<std::vector<long long>>;

inline Mat adjacency(const tms::MarkovGraph& g) {
  Mat a(g.size(), std::vector<long long>(g.size(), 0));
  for (auto [u, v] : g.edges()) a[u][v] = 1;
  return a;
}

inline Mat mul(const Mat& a, const Mat& b) {
  std::size_t n = a.size();
  Mat c(n, std::vector<long long>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (a[i][k])
        for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat power(const Mat& a, std::size_t n) {
  Mat r(a.size(), std::vector<long long>(a.size(), 0));
  for (std::size_t i = 0; i < a.size(); ++i) r[i][i] = 1;
  for (std::size_t k = 0; k < n; ++k) r = mul(r, a);
  return r;
}

// Visits every sequence in S^len (odometer), no admissibility filtering.
inline void for_each_sequence(std::size_t alphabet, std::size_t len,
                              const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> w(len, 0);
  for (;;) {
    f(w);
    std::size_t i = 0;
    while (i < len && ++w[i] == alphabet) w[i++] = 0;
    if (i == len) return;
  }
}

// Brute force over all words: loops of length n at a.
inline long long brute_loops(const tms::MarkovGraph& g, std::size_t a, std::size_t n, bool first_return) {
  long long count = 0;
  for_each_sequence(g.size(), n - 1, [&](const std::vector<std::size_t>& mid) {
    std::vector<std::size_t> w{a};
    w.insert(w.end(), mid.begin(), mid.end());
    if (first_return)
      for (std::size_t x : mid)
        if (x == a) return;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
      if (!g.has_edge(w[i], w[i + 1])) return;
    if (g.has_edge(w.back(), a)) ++count;
  });
  return count;
}

// Random strongly connected aperiodic graph on n states, built from a
// Hamiltonian cycle plus random extra edges including a self-loop.
inline tms::MarkovGraph random_mixing(std::uint32_t seed, std::size_t n, double density = 0.35) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].push_back((i + 1) % n);
  out[rng() % n].push_back(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (u(rng) < density && std::find(out[i].begin(), out[i].end(), j) == out[i].end()) out[i].push_back(j);
  for (auto& r : out) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return tms::MarkovGraph::from_adjacency(ids, out);
}

}  // namespace oracle
