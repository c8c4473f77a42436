#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "tmslab/thermo.hpp"

namespace tms {

enum class DecorrelationCase { a_only, b_only, mixed };

inline std::string to_string(DecorrelationCase c) {
  switch (c) {
    case DecorrelationCase::a_only: return "a";
    case DecorrelationCase::b_only: return "b";
    case DecorrelationCase::mixed: return "mixed";
  }
  return "?";
}

struct Decorrelated {
  LocallyConstantFunction A;
  LocallyConstantFunction a;
  LocallyConstantFunction b;
  std::array<std::vector<StateIndex>, 4> orbits;  // x, y, z, w as length-p loop words
  std::size_t period = 0;
  StateIndex base = 0;
  DecorrelationCase which = DecorrelationCase::mixed;
  double int_a_mu = 0, int_b_mu = 0;
  double int_A_mu = 0, int_A_m = 0;
  std::array<double, 3> q_form{};  // sigma^2(a), cov(a,b), sigma^2(b) under m
  double q_min_eigenvalue = 0;
  double holder_norm_A = 0;
};

namespace detail {

inline std::vector<StateIndex> min_rotation(const std::vector<StateIndex>& w) {
  auto best = w;
  auto r = w;
  for (std::size_t i = 1; i < w.size(); ++i) {
    std::rotate(r.begin(), r.begin() + 1, r.end());
    best = std::min(best, r);
  }
  return best;
}

}  // namespace detail

// Four distinct periodic orbits of period dividing p through a common base state,
// searched by base state, then p = 1, 2, ...; loop words in lexicographic order.
inline std::pair<StateIndex, std::vector<std::vector<StateIndex>>> find_orbit_quadruple(
    const MarkovGraph& g, std::size_t cap = defaults::enumeration_cap) {
  for (StateIndex x = 0; x < g.size(); ++x) {
    for (std::size_t p = 1; p <= cap; ++p) {
      std::vector<std::vector<StateIndex>> picked;
      std::set<std::vector<StateIndex>> seen;
      for (const auto& c : enumerate_cycles(g, x, p, cap)) {
        auto key = detail::min_rotation(c.symbols);
        if (!seen.insert(key).second) continue;
        picked.push_back(c.symbols);
        if (picked.size() == 4) return {x, picked};
      }
      // a mixing graph has many loops at every base well before the cap; stop
      // at the first p whose admissible word table would be too large
      if (std::pow(static_cast<double>(g.size()), static_cast<double>(p + 2)) >
          static_cast<double>(defaults::max_table_entries))
        break;
    }
  }
  throw PreconditionError("decorrelated_observable: no four periodic orbits of a common period sharing a first symbol");
}

inline Decorrelated decorrelated_observable(const MarkovMeasure& mu, const MarkovMeasure& m, const GraphPtr& g,
                                            std::size_t cap = defaults::enumeration_cap) {
  if (!(*mu.base == *g) || !(*m.base == *g)) throw PreconditionError("decorrelated_observable: measures live on another graph");
  auto [x, orbits] = find_orbit_quadruple(*g, cap);
  auto zero_fn = LocallyConstantFunction::constant(g, 0);
  Decorrelated d{zero_fn, zero_fn, zero_fn, {}};
  d.base = x;
  d.period = orbits[0].size();
  for (std::size_t i = 0; i < 4; ++i) d.orbits[i] = orbits[i];
  auto cylinder = [&](const std::vector<StateIndex>& w) {
    auto c = w;
    c.push_back(w.front());
    return c;
  };
  auto cx = cylinder(orbits[0]), cz = cylinder(orbits[2]);
  d.a = LocallyConstantFunction::indicator(g, cx) + (-m.cylinder_mass(cx));
  d.b = LocallyConstantFunction::indicator(g, cz) + (-m.cylinder_mass(cz));
  d.int_a_mu = integrate(mu, d.a);
  d.int_b_mu = integrate(mu, d.b);
  const double zero = 1e-14;
  if (std::abs(d.int_a_mu) <= zero) {
    d.which = DecorrelationCase::a_only;
    d.A = d.a;
  } else if (std::abs(d.int_b_mu) <= zero) {
    d.which = DecorrelationCase::b_only;
    d.A = d.b;
  } else {
    double n = std::hypot(d.int_a_mu, d.int_b_mu);
    d.A = (d.int_b_mu / n) * d.a - (d.int_a_mu / n) * d.b;
  }
  d.int_A_mu = integrate(mu, d.A);
  d.int_A_m = integrate(m, d.A);
  double saa = asymptotic_covariance(m, d.a, d.a), sab = asymptotic_covariance(m, d.a, d.b),
         sbb = asymptotic_covariance(m, d.b, d.b);
  d.q_form = {saa, sab, sbb};
  double tr = saa + sbb, det = saa * sbb - sab * sab;
  d.q_min_eigenvalue = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  d.holder_norm_A = holder_norm(d.A, defaults::holder_beta).norm;
  return d;
}

}  // namespace tms
