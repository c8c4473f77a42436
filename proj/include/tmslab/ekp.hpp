#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tmslab/battery.hpp"
#include "tmslab/renewal.hpp"
#include "tmslab/thermo.hpp"

namespace tms {

struct EKPRecord {
  std::string provenance;
  double int_psi_mu = 0;
  double int_psi_m = 0;
  double P_mu = 0;
  double P_G = 0;
  double gap = 0;
  double ratio = 0;
  double sigma = 0;
  double holder_norm = 0;
};

namespace detail {

// |num| / sqrt(gap), with 0/0 read as 0 and a nonzero numerator at zero gap an error.
inline double ekp_ratio(double num, double gap, const std::string& who) {
  if (gap < -1e-10) throw NumericError("ekp: negative pressure gap " + detail::fmt_num(gap) + " for " + who);
  num = std::abs(num);
  if (gap <= 1e-13) {
    if (num <= 1e-9) return 0;
    throw NumericError("ekp: zero pressure gap with nonzero numerator for " + who);
  }
  return num / std::sqrt(gap);
}

struct EKPContext {
  MarkovMeasure m;
  double P_G = 0;
  double int_psi_m = 0;
  double sigma = 0;
  double holder = 0;
};

inline EKPContext ekp_context(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi) {
  require_same_graph(phi.graph(), psi);
  auto m = rpf_measure(phi);
  EKPContext c{m};
  c.P_G = pressure_finite(phi);
  c.int_psi_m = integrate(m, psi);
  c.sigma = std::sqrt(asymptotic_variance(m, psi));
  c.holder = holder_norm(psi, defaults::holder_beta).norm;
  return c;
}

inline EKPRecord ekp_record(const EKPContext& c, const MarkovMeasure& mu, const LocallyConstantFunction& phi,
                            const LocallyConstantFunction& psi) {
  EKPRecord r;
  r.provenance = mu.provenance;
  r.int_psi_mu = integrate(mu, psi);
  r.int_psi_m = c.int_psi_m;
  r.P_mu = measure_pressure(mu, phi);
  r.P_G = c.P_G;
  r.gap = r.P_G - r.P_mu;
  r.ratio = ekp_ratio(r.int_psi_mu - r.int_psi_m, r.gap, r.provenance);
  r.gap = std::max(r.gap, 0.0);
  r.sigma = c.sigma;
  r.holder_norm = c.holder;
  return r;
}

}  // namespace detail

struct EKPScan {
  std::vector<EKPRecord> records;
  double max_ratio = 0;
  double empirical_C = 0;          // max ratio / ||psi||_beta
  double sharp_limit = 0;          // sqrt(2) sigma_m(psi)
  double high_pressure_gap = 1e-4;
  double high_pressure_max_ratio = 0;
  std::size_t high_pressure_count = 0;
};

inline EKPScan ekp_scan(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                        const std::vector<MarkovMeasure>& family, double high_pressure_gap = 1e-4) {
  auto c = detail::ekp_context(phi, psi);
  EKPScan s;
  s.sharp_limit = std::sqrt(2.0) * c.sigma;
  s.high_pressure_gap = high_pressure_gap;
  for (const auto& mu : family) {
    auto r = detail::ekp_record(c, mu, phi, psi);
    s.max_ratio = std::max(s.max_ratio, r.ratio);
    if (r.gap <= high_pressure_gap) {
      s.high_pressure_max_ratio = std::max(s.high_pressure_max_ratio, r.ratio);
      ++s.high_pressure_count;
    }
    s.records.push_back(std::move(r));
  }
  s.empirical_C = c.holder > 0 ? s.max_ratio / c.holder : 0;
  return s;
}

struct SharpnessReport {
  double sigma = 0;
  double sharp_limit = 0;
  std::vector<double> t;
  std::vector<EKPRecord> records;
  std::vector<double> relative_error;  // ratio / sharp_limit - 1
};

inline std::vector<double> dyadic_sequence(std::size_t n_max) {
  std::vector<double> t;
  for (std::size_t n = 1; n <= n_max; ++n) t.push_back(std::ldexp(1.0, -static_cast<int>(n)));
  return t;
}

inline SharpnessReport sharpness_sequence(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                          const std::vector<double>& ts) {
  auto c = detail::ekp_context(phi, psi);
  if (c.sigma * c.sigma <= 1e-14)
    throw PreconditionError(
        "sharpness_sequence: sigma_m(psi) = 0, so psi is cohomologous to a constant and the ratio family degenerates");
  SharpnessReport r;
  r.sigma = c.sigma;
  r.sharp_limit = std::sqrt(2.0) * c.sigma;
  for (double t : ts) {
    if (t == 0) throw PreconditionError("sharpness_sequence: t = 0 gives m itself");
    auto rec = detail::ekp_record(c, tilted_equilibrium(phi, psi, t), phi, psi);
    r.t.push_back(t);
    r.relative_error.push_back(rec.ratio / r.sharp_limit - 1);
    r.records.push_back(std::move(rec));
  }
  return r;
}

struct SharpRegimeReport {
  double epsilon = 0;
  double bound = 0;             // sqrt(2) e^eps sigma
  double threshold = 0;         // empirical: every record with gap <= threshold obeys the bound
  double predicted_shape = 0;       // eps^2 (sigma / ||psi||_beta)^6, up to an unknown constant
  std::size_t qualifying = 0;
  std::size_t violators = 0;
  bool all_within = false;
  bool degenerate = false;
};

inline SharpRegimeReport sharp_regime_check(const std::vector<EKPRecord>& records, double epsilon) {
  SharpRegimeReport r;
  r.epsilon = epsilon;
  if (records.empty()) return r;
  double sigma = records.front().sigma, holder = records.front().holder_norm;
  r.bound = std::sqrt(2.0) * std::exp(epsilon) * sigma;
  r.predicted_shape = holder > 0 ? epsilon * epsilon * std::pow(sigma / holder, 6) : 0;
  r.degenerate = sigma * sigma <= 1e-14;
  std::vector<const EKPRecord*> sorted;
  for (const auto& x : records) sorted.push_back(&x);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->gap < b->gap; });
  if (r.degenerate) {
    for (auto* x : sorted)
      if (x->gap <= 1e-13) ++r.qualifying;
    r.violators = sorted.size() - r.qualifying;
    return r;
  }
  std::size_t i = 0;
  for (; i < sorted.size(); ++i)
    if (sorted[i]->ratio > r.bound) break;
  r.qualifying = i;
  r.all_within = i == sorted.size();
  r.threshold = i == 0 ? 0 : sorted[i - 1]->gap;
  for (auto* x : sorted)
    if (x->ratio > r.bound) ++r.violators;
  return r;
}

inline SharpRegimeReport sharp_regime_check(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                            double epsilon, const std::vector<MarkovMeasure>& family) {
  return sharp_regime_check(ekp_scan(phi, psi, family).records, epsilon);
}

struct NecessityRow {
  std::size_t n = 0;
  std::size_t window_hi = 0;
  double pressure = 0;
  double gap = 0;
  double int_psi = 0;
  double ratio = 0;
};

struct NecessityReport {
  double P_G = 0;
  double reference = 0;      // integral of psi for the loop measure normalized at the radius
  double holder_norm = 0;
  std::vector<NecessityRow> rows;
  std::vector<EscapeFamilyRecord> escapes;
  double final_ratio = 0;
  double final_normalized = 0;
  bool increasing = true;
};

namespace detail {

// sum f_k e^{w_k} R^k psi_k / sum k f_k e^{w_k} R^k; zero when the mean loop length diverges.
inline double radius_reference(const LoopSystem& ls, const LoopWeights& psi) {
  const auto& t = *ls.tail();
  if (t.alpha <= 2) return 0;
  double lR = std::log(ls.radius());
  std::size_t N = std::max<std::size_t>(ls.explicit_horizon(), std::max(psi.max_key(), t.from));
  N = std::max<std::size_t>(N, std::size_t{1} << 20);
  KahanSum num, den;
  for (std::size_t k = 1; k <= N; ++k) {
    double lf = ls.log_count(k);
    if (lf == -std::numeric_limits<double>::infinity()) continue;
    double q = std::exp(lf + ls.weights().at(k) + static_cast<double>(k) * lR);
    num.add(q * psi.at(k));
    den.add(static_cast<double>(k) * q);
  }
  double wf = std::exp(ls.weights().constant), Nd = static_cast<double>(N);
  num.add(wf * psi.constant * t.c * std::pow(Nd, 1 - t.alpha) / (t.alpha - 1));
  den.add(wf * t.c * std::pow(Nd, 2 - t.alpha) / (t.alpha - 2));
  return num.value() / den.value();
}

}  // namespace detail

// psi is a loop observable; the default is the base-state indicator, whose
// beta-Holder norm on the loop shift is 1 + 1.
inline NecessityReport spr_necessity_demo(const LoopSystem& ls, const LoopWeights& psi = LoopWeights::base_indicator(),
                                          double psi_holder_norm = 2.0, std::size_t n_max = 64) {
  auto v = is_spr(ls);
  if (v.verdict != SprVerdict::not_spr)
    throw PreconditionError("spr_necessity_demo: needs a certified non-SPR system (F(R) < 1), got " + to_string(v.verdict));
  NecessityReport r;
  r.P_G = gurevich_entropy(ls);
  r.reference = detail::radius_reference(ls, psi);
  r.holder_norm = psi_holder_norm;
  for (auto n : doubling_schedule(n_max)) {
    auto e = escape_family(ls, n, psi);
    NecessityRow row;
    row.n = n;
    row.window_hi = e.window_hi;
    row.pressure = e.pressure;
    row.gap = r.P_G - e.pressure;
    row.int_psi = e.int_psi;
    row.ratio = detail::ekp_ratio(e.int_psi - r.reference, row.gap, "escape(n=" + std::to_string(n) + ")");
    if (!r.rows.empty() && row.ratio <= r.rows.back().ratio) r.increasing = false;
    r.rows.push_back(row);
    r.escapes.push_back(std::move(e));
  }
  r.final_ratio = r.rows.back().ratio;
  r.final_normalized = r.final_ratio / psi_holder_norm;
  return r;
}

struct WindowRow {
  double a = 0;
  double gap = 0;     // q(a0) - q(a)
  double lower = 0;
  double upper = 0;   // +inf for outer rows
  bool inner = true;
};

struct KadyrovReport {
  double delta = 0;
  double H = 0;
  double sigma2 = 0;
  double a0 = 0;
  double radius = 0;            // delta sigma^4 / H, with psi normalized
  double holder_norm = 0;       // of the original psi
  std::vector<WindowRow> rows;
  double worst_inner_lower_slack = std::numeric_limits<double>::infinity();  // min (gap/lower - 1)
  double worst_inner_upper_slack = std::numeric_limits<double>::infinity();  // min (1 - gap/upper)
  double worst_outer_slack = std::numeric_limits<double>::infinity();        // min (gap/lower - 1)
  bool ok = false;
};

// Both window bounds on psi / ||psi||_beta. H defaults to 8 max(1, |p'''(0)|).
inline KadyrovReport kadyrov_window_check(const LocallyConstantFunction& phi, const LocallyConstantFunction& psi,
                                          double delta, std::optional<double> H = std::nullopt) {
  if (!(delta > 0 && delta < 1.0 / 3)) throw PreconditionError("kadyrov_window_check: delta must lie in (0, 1/3)");
  KadyrovReport r;
  r.delta = delta;
  r.holder_norm = holder_norm(psi, defaults::holder_beta).norm;
  if (r.holder_norm == 0) throw PreconditionError("kadyrov_window_check: psi is zero");
  auto u = psi / r.holder_norm;
  auto m = rpf_measure(phi);
  r.a0 = integrate(m, u);
  r.sigma2 = asymptotic_variance(m, u);
  if (r.sigma2 <= 1e-14) throw PreconditionError("kadyrov_window_check: sigma_m(psi) = 0");
  if (!H) {
    double h = 1e-3;
    double p3 = (asymptotic_variance(tilted_equilibrium(phi, u, h), u) - asymptotic_variance(tilted_equilibrium(phi, u, -h), u)) /
                (2 * h);
    H = 8 * std::max(1.0, std::abs(p3));
  }
  r.H = *H;
  r.radius = delta * r.sigma2 * r.sigma2 / r.H;
  auto slopes = asymptotic_slopes(u);
  if (!(r.a0 - r.radius > slopes.min_mean && r.a0 + r.radius < slopes.max_mean))
    throw PreconditionError("kadyrov_window_check: window leaves the domain of q");
  double q0 = pressure_finite(phi);
  auto gap_at = [&](double a) { return q0 - restricted_pressure(phi, u, a, 1e-13, slopes).q; };
  r.rows.push_back({r.a0, 0.0, 0.0, 0.0, true});
  for (double s : {-1.0, -0.75, -0.5, -0.25, -0.1, 0.1, 0.25, 0.5, 0.75, 1.0}) {
    double a = r.a0 + s * r.radius, d2 = (a - r.a0) * (a - r.a0);
    WindowRow w{a, gap_at(a), std::exp(-delta) * d2 / (2 * r.sigma2), std::exp(delta) * d2 / (2 * r.sigma2), true};
    r.worst_inner_lower_slack = std::min(r.worst_inner_lower_slack, w.gap / w.lower - 1);
    r.worst_inner_upper_slack = std::min(r.worst_inner_upper_slack, 1 - w.gap / w.upper);
    r.rows.push_back(w);
  }
  double coef = delta * r.sigma2 / (8 * r.H);
  for (int side : {-1, 1}) {
    double room = side < 0 ? r.a0 - slopes.min_mean : slopes.max_mean - r.a0;
    std::vector<double> offsets;
    for (double f = 1.5; f * r.radius < 0.9 * room; f *= 3) offsets.push_back(f * r.radius);
    offsets.push_back(0.9 * room);
    for (double d : offsets) {
      double a = r.a0 + side * d;
      double g;
      try {
        g = gap_at(a);
      } catch (const PreconditionError&) {
        break;
      }
      WindowRow w{a, g, coef * d, std::numeric_limits<double>::infinity(), false};
      r.worst_outer_slack = std::min(r.worst_outer_slack, w.gap / w.lower - 1);
      r.rows.push_back(w);
    }
  }
  r.ok = r.worst_inner_lower_slack >= 0 && r.worst_inner_upper_slack >= 0 && r.worst_outer_slack >= 0;
  return r;
}

// EKP over the whole SPR battery: every graph, every observable, full measure family.
struct BatteryScanRow {
  std::string graph;
  std::string observable;
  EKPScan scan;
};

struct BatteryScan {
  std::uint64_t family_seed = 0;
  std::vector<BatteryScanRow> rows;
  double empirical_C = 0;       // max over rows of max ratio / ||psi||_beta
  double max_raw_ratio = 0;
  double worst_high_pressure_excess = 0;  // max over rows of high-pressure ratio / (sqrt2 sigma e^0.02)
};

inline BatteryScan battery_scan(const std::vector<BatteryGraph>& battery, std::uint64_t family_seed,
                                const FamilyOptions& opt = {}) {
  BatteryScan b;
  b.family_seed = family_seed;
  for (const auto& bg : battery)
    for (const auto& ob : bg.observables) {
      auto fam = measure_family(bg.phi, ob.psi, family_seed, opt);
      auto s = ekp_scan(bg.phi, ob.psi, fam);
      b.empirical_C = std::max(b.empirical_C, s.empirical_C);
      b.max_raw_ratio = std::max(b.max_raw_ratio, s.max_ratio);
      if (s.sharp_limit > 0)
        b.worst_high_pressure_excess =
            std::max(b.worst_high_pressure_excess, s.high_pressure_max_ratio / (s.sharp_limit * std::exp(0.02)));
      b.rows.push_back({bg.name, ob.name, std::move(s)});
    }
  return b;
}

}  // namespace tms
