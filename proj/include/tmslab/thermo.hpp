#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "tmslab/config.hpp"
#include "tmslab/error.hpp"
#include "tmslab/measure.hpp"
#include "tmslab/observable.hpp"
#include "tmslab/transfer.hpp"

namespace tms {

struct VarianceReport {
  double exact = 0;          // Poisson-equation route
  double truncated = 0;      // sum of covariances
  std::size_t terms = 0;
  bool truncated_converged = false;
};

namespace detail {

// Centered state functions on a common lift of mu.
struct CenteredFunctions {
  MarkovMeasure mu;
  std::vector<std::vector<double>> fbar;
};

inline CenteredFunctions center(const MarkovMeasure& mu, const std::vector<const LocallyConstantFunction*>& fs) {
  std::size_t K = mu.order;
  for (auto* f : fs) {
    require_same_graph(*mu.base, *f);
    K = std::max(K, f->memory());
  }
  CenteredFunctions c{mu.lifted(K), {}};
  for (auto* f : fs) {
    std::vector<double> v(c.mu.size());
    KahanSum mean;
    for (std::size_t a = 0; a < v.size(); ++a) {
      v[a] = f->value(c.mu.alphabet[a]);
      mean.add(c.mu.pi[a] * v[a]);
    }
    for (double& x : v) x -= mean.value();
    c.fbar.push_back(std::move(v));
  }
  return c;
}

inline double inner(const std::vector<double>& pi, const std::vector<double>& x, const std::vector<double>& y) {
  KahanSum s;
  for (std::size_t i = 0; i < pi.size(); ++i) s.add(pi[i] * x[i] * y[i]);
  return s.value();
}

// Solves (I - P) g = f with pi.g = 0 through the bordered system
// [[I-P, 1], [pi^T, 0]].
inline std::vector<std::vector<double>> poisson_solve(const MarkovMeasure& mu,
                                                      const std::vector<std::vector<double>>& rhs) {
  const int n = static_cast<int>(mu.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (int a = 0; a < n; ++a) {
    trip.emplace_back(a, a, 1.0);
    for (auto [b, v] : mu.P[static_cast<std::size_t>(a)]) trip.emplace_back(a, static_cast<int>(b), -v);
    trip.emplace_back(a, n, 1.0);
    trip.emplace_back(n, a, mu.pi[static_cast<std::size_t>(a)]);
  }
  Eigen::SparseMatrix<double> M(n + 1, n + 1);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) throw NumericError("Poisson system is singular; chain not irreducible");
  std::vector<std::vector<double>> out;
  for (const auto& f : rhs) {
    Eigen::VectorXd b(n + 1);
    for (int i = 0; i < n; ++i) b[i] = f[static_cast<std::size_t>(i)];
    b[n] = 0;
    Eigen::VectorXd x = lu.solve(b);
    // one step of iterative refinement
    Eigen::VectorXd r = b - M * x;
    x += lu.solve(r);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw NumericError("Poisson solve failed");
    out.emplace_back(x.data(), x.data() + n);
  }
  return out;
}

}  // namespace detail

inline double asymptotic_covariance(const MarkovMeasure& mu, const LocallyConstantFunction& f,
                                    const LocallyConstantFunction& g) {
  auto c = detail::center(mu, {&f, &g});
  auto sol = detail::poisson_solve(c.mu, c.fbar);
  const auto& pi = c.mu.pi;
  return detail::inner(pi, c.fbar[0], sol[1]) + detail::inner(pi, c.fbar[1], sol[0]) -
         detail::inner(pi, c.fbar[0], c.fbar[1]);
}

inline double asymptotic_variance(const MarkovMeasure& mu, const LocallyConstantFunction& psi) {
  auto c = detail::center(mu, {&psi});
  auto sol = detail::poisson_solve(c.mu, c.fbar);
  // martingale increments g(b) - Pg(a) with Pg = g - fbar
  const auto& g = sol[0];
  const auto& f = c.fbar[0];
  KahanSum v;
  for (std::size_t a = 0; a < g.size(); ++a)
    for (auto [b, p] : c.mu.P[a]) {
      double d = g[b] - g[a] + f[a];
      v.add(c.mu.pi[a] * p * d * d);
    }
  return v.value();
}

inline VarianceReport variance_report(const MarkovMeasure& mu, const LocallyConstantFunction& psi,
                                      std::size_t max_terms = defaults::covariance_max_terms) {
  VarianceReport r;
  r.exact = asymptotic_variance(mu, psi);
  auto c = detail::center(mu, {&psi});
  const auto& pi = c.mu.pi;
  const auto& f = c.fbar[0];
  KahanSum s;
  double c0 = detail::inner(pi, f, f);
  s.add(c0);
  std::vector<double> v = f, w(f.size());
  double fmax = 0;
  for (double x : f) fmax = std::max(fmax, std::abs(x));
  std::size_t quiet = 0;
  for (std::size_t j = 1; j <= max_terms; ++j) {
    detail::apply(c.mu.P, v, w);
    std::swap(v, w);
    double mean = 0;
    for (std::size_t i = 0; i < v.size(); ++i) mean += pi[i] * v[i];
    for (double& x : v) x -= mean;
    double cj = detail::inner(pi, f, v);
    s.add(2 * cj);
    r.terms = j;
    double vmax = 0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    if (vmax <= 1e-15 * fmax || fmax == 0) {
      if (++quiet >= 3) {
        r.truncated_converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }
  r.truncated = s.value();
  return r;
}

struct Slopes {
  double min_mean = 0;
  double max_mean = 0;
};

// Extreme cycle means of psi, which are the asymptotic slopes of the
// pressure curve.
inline Slopes asymptotic_slopes(const LocallyConstantFunction& psi) {
  if (!is_strongly_connected(psi.graph())) throw PreconditionError("asymptotic_slopes: graph not strongly connected");
  auto L = transfer_matrix(psi);
  Slopes s;
  s.max_mean = detail::karp_max_mean(L.log_weight);
  auto neg = L.log_weight;
  for (auto& row : neg)
    for (auto& [j, v] : row) v = -v;
  s.min_mean = -detail::karp_max_mean(neg);
  return s;
}

struct PressureCurve {
  std::vector<double> t, p, p1, p2_fd, p2_gk;
  double min_second_difference = 0;
  double max_p2_disagreement = 0;
};

// Pressure, first and second derivatives at a single t.
struct PressurePoint {
  double t = 0, p = 0, p1 = 0, p2_gk = 0;
};

inline double curve_pressure(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi, double t,
                             double tol = defaults::eigen_tol) {
  return pressure_finite(phi + t * psi, tol);
}

inline PressurePoint pressure_point(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi, double t,
                                    double tol = defaults::eigen_tol) {
  PressurePoint pt;
  pt.t = t;
  pt.p = curve_pressure(phi, psi, t, tol);
  auto mt = tilted_equilibrium(phi, psi, t);
  pt.p1 = integrate(mt, psi);
  pt.p2_gk = asymptotic_variance(mt, psi);
  return pt;
}

// Central second difference with one Richardson level.
inline double fd_second_derivative(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi, double t,
                                   double h = defaults::fd_step, double tol = defaults::eigen_tol) {
  auto p = [&](double s) { return curve_pressure(phi, psi, s, tol); };
  double p0 = p(t);
  double d1 = (p(t + h) - 2 * p0 + p(t - h)) / (h * h);
  double h2 = h / 2;
  double d2 = (p(t + h2) - 2 * p0 + p(t - h2)) / (h2 * h2);
  return (4 * d2 - d1) / 3;
}

// Minimum over interior grid points of the second difference, normalized to
// the plain second difference on a uniform grid.
inline double min_second_difference(const std::vector<double>& t, const std::vector<double>& p) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    double s1 = (p[i] - p[i - 1]) / (t[i] - t[i - 1]);
    double s2 = (p[i + 1] - p[i]) / (t[i + 1] - t[i]);
    m = std::min(m, (s2 - s1) * (t[i + 1] - t[i - 1]) / 2);
  }
  return t.size() < 3 ? 0.0 : m;
}

inline PressureCurve pressure_curve(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                    const std::vector<double>& grid, double tol = defaults::eigen_tol,
                                    double h = defaults::fd_step) {
  if (grid.empty()) throw PreconditionError("pressure_curve: empty grid");
  require_same_graph(phi.graph(), psi);
  PressureCurve c;
  for (double t : grid) {
    auto pt = pressure_point(phi, psi, t, tol);
    c.t.push_back(t);
    c.p.push_back(pt.p);
    c.p1.push_back(pt.p1);
    c.p2_gk.push_back(pt.p2_gk);
    c.p2_fd.push_back(fd_second_derivative(phi, psi, t, h, tol));
    c.max_p2_disagreement = std::max(c.max_p2_disagreement, std::abs(c.p2_fd.back() - pt.p2_gk));
  }
  c.min_second_difference = min_second_difference(c.t, c.p);
  return c;
}

struct RestrictedPressure {
  double a = 0;
  double q = 0;
  double t = 0;
  double p = 0;
  double p2 = 0;  // p''(t) by Green-Kubo
  std::size_t iterations = 0;
};

// Solves p'(t) = a by safeguarded Newton inside a bracket grown
// geometrically from t = 0, then q(a) = p(t) - t a.
inline RestrictedPressure restricted_pressure(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                              double a, double tol = 1e-13,
                                              std::optional<Slopes> slopes = std::nullopt) {
  Slopes s = slopes ? *slopes : asymptotic_slopes(psi);
  if (!(a > s.min_mean && a < s.max_mean))
    throw PreconditionError("restricted_pressure: a=" + detail::fmt_num(a) + " outside the open domain (" +
                            detail::fmt_num(s.min_mean) + ", " + detail::fmt_num(s.max_mean) + ")");
  auto eval = [&](double t) { return pressure_point(phi, psi, t); };
  RestrictedPressure r;
  r.a = a;
  PressurePoint cur = eval(0.0);
  double f = cur.p1 - a;
  double lo = 0, hi = 0;
  if (f == 0) {
    r.q = cur.p;
    r.p = cur.p;
    r.p2 = cur.p2_gk;
    return r;
  }
  double dir = f < 0 ? 1.0 : -1.0, step = 1.0, prev = 0.0;
  PressurePoint edge = cur;
  for (;;) {
    double t = dir * step;
    if (std::abs(t) > defaults::legendre_t_cap)
      throw PreconditionError("restricted_pressure: bracket exceeded |t| <= 500 (a too close to the domain edge)");
    edge = eval(t);
    if ((edge.p1 - a) * dir >= 0) {
      lo = std::min(prev, t);
      hi = std::max(prev, t);
      break;
    }
    prev = t;
    cur = edge;
    step *= 2;
  }
  if (edge.p1 == a) cur = edge;
  double t = cur.t;
  for (std::size_t it = 0; it < 400; ++it) {
    r.iterations = it + 1;
    f = cur.p1 - a;
    if (std::abs(f) <= tol * std::max(1.0, std::abs(a))) break;
    if (f < 0)
      lo = std::max(lo, t);
    else
      hi = std::min(hi, t);
    double next;
    if (cur.p2_gk >= defaults::newton_min_curvature) {
      next = t - f / cur.p2_gk;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    } else {
      next = 0.5 * (lo + hi);
    }
    if (next == t || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) break;
    t = next;
    cur = eval(t);
  }
  r.t = cur.t;
  r.p = cur.p;
  r.p2 = cur.p2_gk;
  r.q = cur.p - cur.t * a;
  return r;
}

struct LegendreSample {
  double a = 0, t_of_a = 0, q = 0, q1 = 0, q2 = 0;
};

struct LegendreData {
  double a0 = 0;
  double sigma2 = 0;
  double lo = 0, hi = 0;  // window
  std::vector<LegendreSample> samples;
};

// Window half-width default: 0.25 sigma^2 times the distance from a0 to the
// nearer domain endpoint, capped at half that distance.
inline LegendreData legendre_window(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                    std::optional<double> half_width = std::nullopt, std::size_t n = 21) {
  auto s = asymptotic_slopes(psi);
  auto m = rpf_measure(phi);
  LegendreData d;
  d.a0 = integrate(m, psi);
  d.sigma2 = asymptotic_variance(m, psi);
  if (!(s.max_mean > s.min_mean) || d.sigma2 <= 0)
    throw PreconditionError("legendre_window: psi is cohomologous to a constant (zero variance)");
  double dist = std::min(d.a0 - s.min_mean, s.max_mean - d.a0);
  double w = half_width ? *half_width : std::min(0.25 * d.sigma2 * dist, 0.5 * dist);
  if (!(w > 0) || w >= dist) throw PreconditionError("legendre_window: window outside the domain of q");
  d.lo = d.a0 - w;
  d.hi = d.a0 + w;
  for (std::size_t i = 0; i < n; ++i) {
    double a = n == 1 ? d.a0 : d.lo + (d.hi - d.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    auto r = restricted_pressure(phi, psi, a, 1e-13, s);
    d.samples.push_back({a, r.t, r.q, -r.t, -1.0 / r.p2});
  }
  return d;
}

struct LegendreIdentityRow {
  double t = 0, a = 0, q1_fd = 0, q2_fd = 0, minus_t = 0, minus_inv_p2 = 0;
};

struct LegendreIdentityReport {
  std::vector<LegendreIdentityRow> rows;
  double max_q1_error = 0;
  double max_q2_error = 0;
};

// Finite-difference q', q'' at a = p'(t), compared with -t and -1/p''(t).
inline LegendreIdentityReport legendre_identity_check(const LocallyConstantFunction& phi,
                                                      const LocallyConstantFunction& psi,
                                                      const std::vector<double>& t_grid, double da = 1e-4) {
  auto s = asymptotic_slopes(psi);
  LegendreIdentityReport rep;
  for (double t : t_grid) {
    auto pt = pressure_point(phi, psi, t);
    double a = pt.p1;
    double qc = pt.p - t * a;
    auto qp = restricted_pressure(phi, psi, a + da, 1e-14, s).q;
    auto qm = restricted_pressure(phi, psi, a - da, 1e-14, s).q;
    LegendreIdentityRow row;
    row.t = t;
    row.a = a;
    row.q1_fd = (qp - qm) / (2 * da);
    row.q2_fd = (qp - 2 * qc + qm) / (da * da);
    row.minus_t = -t;
    row.minus_inv_p2 = -1.0 / pt.p2_gk;
    rep.max_q1_error = std::max(rep.max_q1_error, std::abs(row.q1_fd - row.minus_t));
    rep.max_q2_error = std::max(rep.max_q2_error, std::abs(row.q2_fd - row.minus_inv_p2));
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace tms
