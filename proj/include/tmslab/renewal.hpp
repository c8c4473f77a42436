#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tmslab/config.hpp"
#include "tmslab/error.hpp"
#include "tmslab/transfer.hpp"

namespace tms {

// Per-loop-length values: total weight carried by one loop of length n.
struct LoopWeights {
  double constant = 0;
  std::map<std::size_t, double> values;

  double at(std::size_t n) const {
    auto it = values.find(n);
    return it == values.end() ? constant : it->second;
  }
  std::size_t max_key() const { return values.empty() ? 0 : values.rbegin()->first; }
  static LoopWeights base_indicator() { return LoopWeights{1.0, {}}; }
};

// f_n = floor(c * rho^-n * n^-alpha) for n >= from.
struct LoopTail {
  double c = 1;
  double rho = 0.5;
  double alpha = 0;
  std::size_t from = 1;
};

class LoopSystem {
 public:
  LoopSystem(std::map<std::size_t, long long> f, std::optional<LoopTail> tail = std::nullopt, LoopWeights w = {},
             bool require_aperiodic = true)
      : explicit_(std::move(f)), tail_(tail), weights_(std::move(w)) {
    if (explicit_.count(0)) throw PreconditionError("loop system: loop length 0");
    if (tail_) {
      const auto& t = *tail_;
      if (!(t.c > 0) || !(t.rho > 0) || !(t.rho <= 1) || !(t.alpha >= 0) || t.from == 0)
        throw PreconditionError("loop system: tail needs c>0, 0<rho<=1, alpha>=0, from>=1");
      if (t.rho == 1 && !(t.alpha == 0 && t.c >= 1))
        throw PreconditionError("loop system: tail with rho=1 must have alpha=0 and c>=1 to stay infinite");
    }
    for (auto& [n, v] : explicit_) {
      if (count(n) < 0) throw PreconditionError("loop system: negative loop count at length " + std::to_string(n));
    }
    if (positive_lengths(1).empty()) throw PreconditionError("loop system: no loops");
    if (require_aperiodic && period() != 1)
      throw PreconditionError("loop system: gcd of loop lengths is " + std::to_string(period()) + ", not 1");
  }

  static LoopSystem finite(std::map<std::size_t, long long> f, LoopWeights w = {}) {
    return LoopSystem(std::move(f), std::nullopt, std::move(w));
  }

  const std::map<std::size_t, long long>& explicit_part() const { return explicit_; }
  const std::optional<LoopTail>& tail() const { return tail_; }
  const LoopWeights& weights() const { return weights_; }
  bool has_tail() const { return tail_.has_value(); }
  double radius() const { return tail_ ? tail_->rho : std::numeric_limits<double>::infinity(); }
  std::size_t max_explicit() const { return explicit_.empty() ? 0 : explicit_.rbegin()->first; }

  // Beyond this length every count is given by the tail formula.
  std::size_t explicit_horizon() const { return std::max(max_explicit(), weights_.max_key()); }

  long double tail_count(std::size_t n) const {
    if (!tail_ || n < tail_->from) return 0;
    const auto& t = *tail_;
    long double v = static_cast<long double>(t.c) * std::pow(1.0L / t.rho, static_cast<long double>(n)) /
                    std::pow(static_cast<long double>(n), static_cast<long double>(t.alpha));
    return v < 0x1p62L ? std::floor(v) : v;
  }

  long double count(std::size_t n) const {
    auto it = explicit_.find(n);
    long double e = it == explicit_.end() ? 0 : static_cast<long double>(it->second);
    return e + tail_count(n);
  }

  // log f_n, -inf when f_n = 0; stays finite where f_n overflows a double.
  double log_count(std::size_t n) const {
    if (tail_ && n >= tail_->from && !explicit_.count(n)) {
      const auto& t = *tail_;
      double lv = std::log(t.c) - static_cast<double>(n) * std::log(t.rho) - t.alpha * std::log(static_cast<double>(n));
      if (lv > 43) return lv;
    }
    long double v = count(n);
    return v > 0 ? static_cast<double>(std::log(v)) : -std::numeric_limits<double>::infinity();
  }

  // Positive loop lengths among 1..max(horizon, first tail positives) plus `extra` more lengths.
  std::vector<std::size_t> positive_lengths(std::size_t extra) const {
    std::vector<std::size_t> out;
    std::size_t hi = explicit_horizon();
    if (tail_) hi = std::max(hi, tail_->from);
    std::size_t n = 1;
    for (; n <= hi; ++n)
      if (count(n) > 0) out.push_back(n);
    if (tail_) {
      std::size_t found = 0;
      for (; found < extra + 1 && n < hi + 100000; ++n)
        if (count(n) > 0) {
          out.push_back(n);
          ++found;
        }
    }
    return out;
  }

  std::size_t period() const {
    std::size_t g = 0;
    for (auto n : positive_lengths(2)) g = std::gcd(g, n);
    return g;
  }

  LoopSystem with_weights(LoopWeights w) const { return LoopSystem(explicit_, tail_, std::move(w), false); }

 private:
  std::map<std::size_t, long long> explicit_;
  std::optional<LoopTail> tail_;
  LoopWeights weights_;
};

struct GFValue {
  double value = 0;
  double lower = 0;
  double upper = 0;
  bool divergent = false;
  std::size_t terms = 0;
};

namespace detail {

inline double loop_term(const LoopSystem& ls, std::size_t n, double log_z) {
  double lf = ls.log_count(n);
  if (lf == -std::numeric_limits<double>::infinity()) return 0;
  return std::exp(lf + ls.weights().at(n) + static_cast<double>(n) * log_z);
}

// Upper bound for the tail part of sum_{n>N} n^k f_n e^{w} z^n (k = 0 or 1), z < R.
inline double tail_remainder_bound(const LoopTail& t, double weight_factor, double z, std::size_t N, int k) {
  double x = z / t.rho;
  double n1 = static_cast<double>(N + 1);
  if (x >= 1) return std::numeric_limits<double>::infinity();
  double lead = std::log(t.c) + n1 * std::log(x) - t.alpha * std::log(n1);
  if (k == 0) return weight_factor * std::exp(lead) / (1 - x);
  return weight_factor * std::exp(lead) * n1 / ((1 - x) * (1 - x));
}

}  // namespace detail

// F(z) = sum f_n e^{w_n} z^n with certified truncation bounds. N = 0 picks N automatically.
inline GFValue generating_function(const LoopSystem& ls, double z, std::size_t N = 0) {
  if (!(z >= 0)) throw PreconditionError("generating function: z must be >= 0");
  GFValue r;
  if (z == 0) return r;
  const double inf = std::numeric_limits<double>::infinity();
  if (N != 0 && N < ls.explicit_horizon())
    throw PreconditionError("generating function: truncation below explicit support");
  double R = ls.radius();
  if (ls.has_tail() && z > R) {
    r.value = r.lower = r.upper = inf;
    r.divergent = true;
    return r;
  }
  double lz = std::log(z);
  std::size_t base = std::max<std::size_t>(ls.explicit_horizon(), ls.has_tail() ? ls.tail()->from : 0);
  auto partial = [&](std::size_t from, std::size_t to, KahanSum& s) {
    for (std::size_t n = from; n <= to; ++n) s.add(detail::loop_term(ls, n, lz));
  };
  KahanSum s;
  if (!ls.has_tail()) {
    partial(1, std::max<std::size_t>(base, 1), s);
    r.value = r.lower = r.upper = s.value();
    r.terms = base;
    return r;
  }
  const auto& t = *ls.tail();
  double wf = std::exp(ls.weights().constant);
  if (z == R) {
    if (t.alpha <= 1) {
      r.value = r.lower = r.upper = inf;
      r.divergent = true;
      return r;
    }
    auto bounds = [&](std::size_t n_end, double& lo, double& hi) {
      double Nd = static_cast<double>(n_end);
      hi = wf * t.c * std::pow(Nd, 1 - t.alpha) / (t.alpha - 1);
      lo = wf * (t.c * std::pow(Nd + 1, 1 - t.alpha) / (t.alpha - 1) - std::pow(R, Nd + 1) / (1 - R));
      lo = std::max(lo, 0.0);
    };
    double lo = 0, hi = 0;
    std::size_t n_end = N ? N : std::max<std::size_t>(base, 4096);
    partial(1, n_end, s);
    bounds(n_end, lo, hi);
    if (!N) {
      while (hi - lo > 1e-16 * std::max(1.0, s.value()) && n_end < (std::size_t{1} << 22)) {
        partial(n_end + 1, 2 * n_end, s);
        n_end *= 2;
        bounds(n_end, lo, hi);
      }
    }
    r.lower = s.value() + lo;
    r.upper = s.value() + hi;
    r.value = s.value() + 0.5 * (lo + hi);
    r.terms = n_end;
    return r;
  }
  std::size_t n_end = std::max<std::size_t>(base, 1);
  partial(1, n_end, s);
  if (N) {
    partial(n_end + 1, N, s);
    n_end = std::max(n_end, N);
  } else {
    const std::size_t hard = std::size_t{1} << 26;
    while (n_end < hard) {
      double b = detail::tail_remainder_bound(t, wf, z, n_end, 0);
      if (b <= 1e-17 * std::max(s.value(), 1e-300)) break;
      std::size_t next = std::min(hard, n_end + std::max<std::size_t>(64, n_end / 2));
      partial(n_end + 1, next, s);
      n_end = next;
    }
  }
  double b = detail::tail_remainder_bound(t, wf, z, n_end, 0);
  r.lower = s.value();
  r.upper = s.value() + b;
  r.value = s.value() + 0.5 * b;
  r.terms = n_end;
  return r;
}

enum class SprVerdict { spr, not_spr, boundary };

inline std::string to_string(SprVerdict v) {
  switch (v) {
    case SprVerdict::spr: return "spr";
    case SprVerdict::not_spr: return "not_spr";
    case SprVerdict::boundary: return "boundary";
  }
  return "?";
}

struct SprReport {
  SprVerdict verdict = SprVerdict::spr;
  bool spr = true;
  GFValue at_radius;  // F(R); infinite for finite support
};

inline SprReport is_spr(const LoopSystem& ls) {
  SprReport r;
  const double inf = std::numeric_limits<double>::infinity();
  if (!ls.has_tail()) {
    r.at_radius = GFValue{inf, inf, inf, true, 0};
    return r;
  }
  r.at_radius = generating_function(ls, ls.radius());
  if (r.at_radius.lower > 1) {
    r.verdict = SprVerdict::spr;
  } else if (r.at_radius.upper < 1) {
    r.verdict = SprVerdict::not_spr;
  } else {
    r.verdict = SprVerdict::boundary;
  }
  r.spr = r.verdict == SprVerdict::spr;
  return r;
}

namespace detail {

// Root of F(z) = 1 in (0, R); nullopt when F(R) <= 1.
inline std::optional<double> loop_root(const LoopSystem& ls) {
  double lo = 0, hi;
  if (ls.has_tail()) {
    auto fr = generating_function(ls, ls.radius());
    if (!fr.divergent && fr.upper <= 1) return std::nullopt;
    hi = ls.radius();
  } else {
    hi = 1;
    while (generating_function(ls, hi).value < 1) hi *= 2;
  }
  for (int it = 0; it < 2000; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    auto f = generating_function(ls, mid);
    if (f.divergent || f.value >= 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Gurevich pressure of the loop-constant potential (entropy when weights are zero).
inline double gurevich_entropy(const LoopSystem& ls) {
  auto z = detail::loop_root(ls);
  if (!z) return -std::log(ls.radius());
  return -std::log(*z);
}

inline double discriminant(const LoopSystem& ls) {
  const double inf = std::numeric_limits<double>::infinity();
  if (!ls.has_tail()) return inf;
  auto f = generating_function(ls, ls.radius());
  if (f.divergent) return inf;
  return std::log(f.value);
}

struct LoopMeasure {
  double z = 0;                 // root of F(z) = 1
  std::vector<double> q;        // q[n-1] = probability of loop length n, through `terms`
  double mean_length = 0;
  double base_mass = 0;
  double induced_entropy = 0;   // H(q), loop multiplicities included
  double entropy = 0;           // Abramov: H / mean length
  double pressure = 0;          // (H + sum q_n w_n) / mean length
  std::size_t terms = 0;
};

inline LoopMeasure parry_on_loops(const LoopSystem& ls) {
  auto root = detail::loop_root(ls);
  if (!root) throw PreconditionError("parry_on_loops: F(R) <= 1, not positively recurrent, no equilibrium measure");
  LoopMeasure m;
  m.z = *root;
  double lz = std::log(m.z);
  std::size_t N = std::max<std::size_t>(ls.explicit_horizon(), 1);
  if (ls.has_tail()) {
    N = std::max(N, ls.tail()->from);
    double wf = std::exp(ls.weights().constant);
    while (detail::tail_remainder_bound(*ls.tail(), wf, m.z, N, 1) > 1e-17 && N < (std::size_t{1} << 26))
      N += std::max<std::size_t>(64, N / 2);
  }
  m.q.resize(N);
  KahanSum tau, H, W, total;
  for (std::size_t n = 1; n <= N; ++n) {
    double lf = ls.log_count(n);
    if (lf == -std::numeric_limits<double>::infinity()) continue;
    double lq = lf + ls.weights().at(n) + static_cast<double>(n) * lz;
    double q = std::exp(lq);
    m.q[n - 1] = q;
    total.add(q);
    tau.add(static_cast<double>(n) * q);
    H.add(q * (lf - lq));
    W.add(q * ls.weights().at(n));
  }
  m.terms = N;
  m.mean_length = tau.value() / total.value();
  m.base_mass = 1 / m.mean_length;
  m.induced_entropy = H.value();
  m.entropy = H.value() / tau.value();
  m.pressure = (H.value() + W.value()) / tau.value();
  return m;
}

struct EscapeFamilyRecord {
  std::size_t n = 0;
  std::size_t window_lo = 0, window_hi = 0;
  double log_z = 0;              // window root: sum over window of f_k e^{w_k} z^k = 1
  std::vector<double> weights;   // induced Bernoulli weights, kept for windows up to 4096 lengths
  double mean_length = 0;
  double entropy = 0;            // Abramov
  double base_mass = 0;
  double pressure = 0;
  double int_psi = 0;
};

inline std::size_t escape_window_end(std::size_t n, double kappa = defaults::escape_kappa) {
  const double cap = static_cast<double>(std::size_t{1} << 25);
  double hi = std::min(cap, std::pow(static_cast<double>(n), kappa));
  return std::max<std::size_t>(n, static_cast<std::size_t>(hi));
}

// Equilibrium measure of the loop system restricted to loop lengths in [n, n^kappa].
inline EscapeFamilyRecord escape_family(const LoopSystem& ls, std::size_t n, const LoopWeights& psi = LoopWeights::base_indicator(),
                                        double kappa = defaults::escape_kappa) {
  if (n == 0) throw PreconditionError("escape_family: window start must be >= 1");
  EscapeFamilyRecord r;
  r.n = n;
  r.window_lo = n;
  r.window_hi = ls.has_tail() ? escape_window_end(n, kappa) : std::min(escape_window_end(n, kappa), ls.max_explicit());
  const double ninf = -std::numeric_limits<double>::infinity();
  // a_k for the window, computed on the fly
  const std::size_t horizon = ls.explicit_horizon();
  const double wc = ls.weights().constant;
  double lc = 0, lr = 0, al = 0;
  if (ls.has_tail()) {
    lc = std::log(ls.tail()->c);
    lr = std::log(ls.tail()->rho);
    al = ls.tail()->alpha;
  }
  auto a = [&](std::size_t k) {
    if (ls.has_tail() && k > horizon && k >= ls.tail()->from) {
      double kd = static_cast<double>(k);
      double lv = lc - kd * lr - al * std::log(kd);
      if (lv > 43) return lv + wc;
    }
    double lf = ls.log_count(k);
    return lf == ninf ? ninf : lf + ls.weights().at(k);
  };
  double y = ninf;
  bool any = false;
  for (std::size_t k = r.window_lo; k <= r.window_hi; ++k) {
    double ak = a(k);
    if (ak == ninf) continue;
    any = true;
    y = std::max(y, -ak / static_cast<double>(k));
  }
  if (!any) throw PreconditionError("escape_family: no loops with length in [" + std::to_string(r.window_lo) + ", " +
                                    std::to_string(r.window_hi) + "]");
  // g(y) = log sum exp(a_k + k y) is convex increasing; Newton from g >= 0 descends monotonically.
  auto eval = [&](double yy, double& g, double& dg) {
    double shift = ninf;
    long double sum = 0, sumk = 0;
    for (std::size_t k = r.window_lo; k <= r.window_hi; ++k) {
      double ak = a(k);
      if (ak == ninf) continue;
      double v = ak + static_cast<double>(k) * yy;
      if (v > shift) {
        long double scale = shift == ninf ? 0.0 : std::exp(shift - v);
        sum *= scale;
        sumk *= scale;
        shift = v;
      }
      long double e = std::exp(v - shift);
      sum += e;
      sumk += static_cast<long double>(k) * e;
    }
    g = shift + static_cast<double>(std::log(sum));
    dg = static_cast<double>(sumk / sum);
  };
  for (int it = 0; it < 100; ++it) {
    double g, dg;
    eval(y, g, dg);
    double step = g / dg;
    y -= step;
    if (std::abs(step) <= 1e-13 * std::max(1.0, std::abs(y))) break;
  }
  r.log_z = y;
  KahanSum total, tau, H, W, P;
  bool keep = r.window_hi - r.window_lo < 4096;
  for (std::size_t k = r.window_lo; k <= r.window_hi; ++k) {
    double ak = a(k);
    double q = 0;
    if (ak != ninf) {
      double wk = k > horizon ? wc : ls.weights().at(k);
      double lf = ak - wk;
      double lq = ak + static_cast<double>(k) * y;
      q = std::exp(lq);
      total.add(q);
      tau.add(static_cast<double>(k) * q);
      H.add(q * (lf - lq));
      W.add(q * wk);
      P.add(q * psi.at(k));
    }
    if (keep) r.weights.push_back(q);
  }
  double norm = total.value();
  if (keep)
    for (double& q : r.weights) q /= norm;
  r.mean_length = tau.value() / norm;
  r.base_mass = 1 / r.mean_length;
  r.entropy = H.value() / tau.value();
  r.pressure = (H.value() + W.value()) / tau.value();
  r.int_psi = P.value() / tau.value();
  return r;
}

inline std::vector<std::size_t> doubling_schedule(std::size_t n_max, std::size_t start = 4) {
  std::vector<std::size_t> s;
  for (std::size_t n = start; n <= n_max; n *= 2) s.push_back(n);
  return s;
}

struct InfinityBound {
  double lower_bound = -std::numeric_limits<double>::infinity();
  std::vector<EscapeFamilyRecord> records;
};

inline InfinityBound pressure_at_infinity_lower_bound(const LoopSystem& ls, std::size_t n_max) {
  if (!ls.has_tail()) throw PreconditionError("pressure at infinity: finite loop system, no measures escape to infinity");
  InfinityBound b;
  for (auto n : doubling_schedule(n_max)) {
    b.records.push_back(escape_family(ls, n));
    b.lower_bound = std::max(b.lower_bound, b.records.back().pressure);
  }
  return b;
}

struct RemovalGap {
  double before = 0;
  double after = 0;
  double drop() const { return before - after; }
};

inline LoopSystem remove_loop(const LoopSystem& ls, std::size_t n) {
  if (n == 0 || ls.count(n) < 1) throw PreconditionError("remove_loop: no loop of length " + std::to_string(n));
  auto f = ls.explicit_part();
  f[n] -= 1;
  return LoopSystem(f, ls.tail(), ls.weights(), false);
}

inline RemovalGap loop_removal_gap(const LoopSystem& ls, std::size_t n) {
  return RemovalGap{gurevich_entropy(ls), gurevich_entropy(remove_loop(ls, n))};
}

// Battery of loop systems used by tests and the acceptance run.
struct NamedLoopSystem {
  std::string name;
  LoopSystem system;
};

inline LoopSystem cubic_non_spr() { return LoopSystem({}, LoopTail{1.0 / 20, 0.25, 3.0, 2}); }
inline LoopSystem cubic_spr() { return LoopSystem({}, LoopTail{1.0, 0.25, 3.0, 1}); }
inline LoopSystem full_shift_loops() { return LoopSystem({}, LoopTail{1.0, 1.0, 0.0, 1}); }

inline std::vector<NamedLoopSystem> renewal_battery() {
  std::vector<NamedLoopSystem> b;
  for (std::size_t K = 2; K <= 20; ++K) {
    std::map<std::size_t, long long> f;
    for (std::size_t n = 1; n <= K; ++n) f[n] = 1;
    b.push_back({"window(" + std::to_string(K) + ")", LoopSystem::finite(f)});
  }
  b.push_back({"full_shift_loops", full_shift_loops()});
  b.push_back({"golden", LoopSystem::finite({{1, 1}, {2, 1}})});
  b.push_back({"golden_weighted", LoopSystem::finite({{1, 1}, {2, 1}}, LoopWeights{0, {{2, -0.3}}})});
  b.push_back({"cubic_non_spr", cubic_non_spr()});
  b.push_back({"cubic_non_spr_weighted", cubic_non_spr().with_weights(LoopWeights{0, {{7, 0.5}}})});
  b.push_back({"cubic_spr", cubic_spr()});
  b.push_back({"cubic_spr_weighted", cubic_spr().with_weights(LoopWeights{0, {{1, -0.2}, {3, 0.1}}})});
  return b;
}

}  // namespace tms
