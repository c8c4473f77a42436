#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "tmslab/io.hpp"

namespace tms::cli {

enum ExitCode : int { ok = 0, parse_error = 1, precondition_error = 2, numeric_error = 3 };

struct RunConfig {
  std::string command;
  std::string graph = "builtin:full:2";
  std::string potential;
  std::string observable;
  std::string out;
  double tol = defaults::eigen_tol;
  std::string grid;
  std::optional<double> window;
  std::uint64_t seed = 1;
  std::size_t cap = defaults::enumeration_cap;
  bool json = false;
};

using Source = std::variant<GraphPtr, LoopSystem>;

inline Source source_from_json(const io::json& j, const std::string& where) {
  if (j.is_object() && j.contains("type") && j["type"] == "loop") return io::loop_from_json(j, where);
  return share(io::graph_from_json(j, where));
}

// builtin:full:N, builtin:golden, loop:{...} (bare keys allowed), inline JSON or a file path.
inline Source resolve_graph(const std::string& s) {
  if (s.rfind("builtin:", 0) == 0) {
    auto rest = s.substr(8);
    if (rest == "golden") return share(MarkovGraph::golden_mean());
    if (rest.rfind("full:", 0) == 0) {
      std::size_t n = 0;
      auto t = rest.substr(5);
      auto r = std::from_chars(t.data(), t.data() + t.size(), n);
      if (r.ec != std::errc{} || r.ptr != t.data() + t.size() || n == 0)
        throw ParseError("--graph: bad state count in \"" + s + "\"");
      return share(MarkovGraph::full_shift(n));
    }
    throw ParseError("--graph: unknown builtin \"" + s + "\"");
  }
  if (s.rfind("loop:", 0) == 0) {
    auto body = s.substr(5);
    auto j = io::parse_json(io::quote_bare_keys(body), "--graph");
    return io::loop_from_json(j, "--graph");
  }
  if (!s.empty() && s.front() == '{') return source_from_json(io::parse_json(s, "--graph"), "--graph");
  return source_from_json(io::load_json_file(s), s);
}

// "", const:x, indicator:<comma-joined ids>, inline JSON or a file path.
inline LocallyConstantFunction resolve_function(const std::string& s, const GraphPtr& g, const std::string& flag,
                                                const LocallyConstantFunction& fallback) {
  if (s.empty()) return fallback;
  if (s.rfind("const:", 0) == 0) {
    double v = 0;
    auto t = s.substr(6);
    auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc{} || r.ptr != t.data() + t.size()) throw ParseError(flag + ": bad constant \"" + t + "\"");
    return LocallyConstantFunction::constant(g, v);
  }
  if (s.rfind("indicator:", 0) == 0) {
    std::vector<StateIndex> w;
    for (const auto& id : io::detail::split_ids(s.substr(10))) {
      auto i = g->find(id);
      if (!i) throw ParseError(flag + ": unknown state \"" + id + "\"");
      w.push_back(*i);
    }
    if (!g->is_admissible(w)) throw PreconditionError(flag + ": indicator word is not admissible");
    return LocallyConstantFunction::indicator(g, w);
  }
  if (s.front() == '{') return io::potential_from_json(io::parse_json(s, flag), g, flag);
  return io::potential_from_json(io::load_json_file(s), g, s);
}

inline std::vector<double> parse_grid(const std::string& s) {
  std::vector<std::string> f;
  std::string cur;
  for (char c : s) {
    if (c == ':') f.push_back(cur), cur.clear();
    else cur += c;
  }
  f.push_back(cur);
  if (f.size() != 3) throw ParseError("--grid: expected lo:hi:n, got \"" + s + "\"");
  double lo = 0, hi = 0;
  std::size_t n = 0;
  auto num = [&](const std::string& t, auto& v) {
    auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc{} || r.ptr != t.data() + t.size()) throw ParseError("--grid: bad number \"" + t + "\"");
  };
  num(f[0], lo);
  num(f[1], hi);
  num(f[2], n);
  if (n == 0) throw ParseError("--grid: n must be positive");
  if (hi < lo) throw ParseError("--grid: hi < lo");
  std::vector<double> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

namespace detail {

struct Ctx {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& err;
  std::ofstream file;

  // artifact goes to --out when given; otherwise to stdout and the summary to stderr
  std::ostream& artifact() {
    if (cfg.out.empty()) return out;
    if (!file.is_open()) {
      file.open(cfg.out, std::ios::binary);
      if (!file) throw PreconditionError("cannot write " + cfg.out);
    }
    return file;
  }
  std::ostream& summary() { return cfg.out.empty() ? err : out; }
};

inline GraphPtr finite_only(const Source& s, const std::string& cmd) {
  if (auto g = std::get_if<GraphPtr>(&s)) return *g;
  throw PreconditionError(cmd + ": needs a finite graph, got a loop system");
}

inline const LoopSystem& loop_only(const Source& s, const std::string& cmd) {
  if (auto l = std::get_if<LoopSystem>(&s)) return *l;
  throw PreconditionError(cmd + ": needs a loop system (loop:{...} or a \"type\":\"loop\" spec)");
}

struct Pair {
  LocallyConstantFunction phi, psi;
};

inline Pair functions(const RunConfig& cfg, const GraphPtr& g) {
  auto phi = resolve_function(cfg.potential, g, "--potential", LocallyConstantFunction::constant(g, 0.0));
  auto psi = resolve_function(cfg.observable, g, "--observable", LocallyConstantFunction::indicator(g, {0}));
  return {phi, psi};
}

inline int cmd_pressure(Ctx& c, const Source& src) {
  if (auto ls = std::get_if<LoopSystem>(&src)) {
    double h = gurevich_entropy(*ls);
    if (c.cfg.json) c.artifact() << io::json{{"P_G", h}, {"source", "loop"}}.dump(2) << '\n';
    else c.out << io::num(h) << '\n';
    return ok;
  }
  auto g = std::get<GraphPtr>(src);
  auto phi = resolve_function(c.cfg.potential, g, "--potential", LocallyConstantFunction::constant(g, 0.0));
  double P = pressure_finite(phi, c.cfg.tol);
  if (c.cfg.json) {
    io::json j;
    j["P_G"] = P;
    if (period(*g) == 1) j["equilibrium"] = io::measure_to_json(rpf_measure(phi));
    c.artifact() << j.dump(2) << '\n';
  } else {
    c.out << io::num(P) << '\n';
  }
  return ok;
}

inline int cmd_spr(Ctx& c, const Source& src) {
  if (auto g = std::get_if<GraphPtr>(&src)) {
    auto phi = resolve_function(c.cfg.potential, *g, "--potential", LocallyConstantFunction::constant(*g, 0.0));
    double h = pressure_finite(phi, c.cfg.tol);
    if (c.cfg.json) c.artifact() << io::json{{"spr", true}, {"verdict", "spr"}, {"h", h}, {"finite", true}}.dump(2) << '\n';
    else c.out << "SPR=true (finite irreducible graph)\nh=" << io::num(h) << '\n';
    return ok;
  }
  const auto& ls = std::get<LoopSystem>(src);
  auto r = is_spr(ls);
  double h = gurevich_entropy(ls), d = discriminant(ls);
  if (c.cfg.json) {
    io::json j{{"spr", r.spr}, {"verdict", to_string(r.verdict)}, {"h", h}, {"discriminant", io::num(d)}};
    if (ls.has_tail()) j["F_R"] = {{"value", r.at_radius.value}, {"lower", r.at_radius.lower}, {"upper", r.at_radius.upper}};
    c.artifact() << j.dump(2) << '\n';
    return ok;
  }
  c.out << "SPR=" << (r.verdict == SprVerdict::boundary ? "undecided" : r.spr ? "true" : "false") << '\n';
  c.out << "verdict=" << to_string(r.verdict) << '\n';
  c.out << "h=" << io::num(h) << '\n';
  c.out << "discriminant=" << io::num(d) << '\n';
  if (ls.has_tail())
    c.out << "F(R) in [" << io::num(r.at_radius.lower) << ", " << io::num(r.at_radius.upper) << "]\n";
  return ok;
}

inline int cmd_curve(Ctx& c, const Source& src) {
  auto g = finite_only(src, "curve");
  auto [phi, psi] = functions(c.cfg, g);
  auto grid = parse_grid(c.cfg.grid.empty() ? "-3:3:13" : c.cfg.grid);
  auto curve = pressure_curve(phi, psi, grid, c.cfg.tol);
  io::write_curve_csv(c.artifact(), curve);
  c.summary() << "points=" << grid.size() << " min_second_difference=" << io::num(curve.min_second_difference)
              << " max_p2_disagreement=" << io::num(curve.max_p2_disagreement) << '\n';
  return ok;
}

inline int cmd_legendre(Ctx& c, const Source& src) {
  auto g = finite_only(src, "legendre");
  auto [phi, psi] = functions(c.cfg, g);
  std::size_t n = 21;
  if (!c.cfg.grid.empty()) n = parse_grid(c.cfg.grid).size();
  auto d = legendre_window(phi, psi, c.cfg.window, n);
  io::write_legendre_csv(c.artifact(), d);
  c.summary() << "a0=" << io::num(d.a0) << " sigma2=" << io::num(d.sigma2) << " window=[" << io::num(d.lo) << ", "
              << io::num(d.hi) << "]\n";
  return ok;
}

inline int cmd_ekp_scan(Ctx& c, const std::string& graph_arg) {
  std::vector<EKPRecord> records;
  double C = 0, limit = 0, max_ratio = 0;
  std::string id = "custom";
  if (graph_arg == "battery") {
    id = kSprBatteryId;
    auto scan = battery_scan(spr_battery(), c.cfg.seed);
    for (auto& row : scan.rows) {
      for (auto r : row.scan.records) {
        r.provenance = row.graph + "/" + row.observable + "/" + r.provenance;
        records.push_back(std::move(r));
      }
      limit = std::max(limit, row.scan.sharp_limit);
    }
    C = scan.empirical_C;
    max_ratio = scan.max_raw_ratio;
  } else {
    auto g = finite_only(resolve_graph(graph_arg), "ekp-scan");
    auto [phi, psi] = functions(c.cfg, g);
    auto s = ekp_scan(phi, psi, measure_family(phi, psi, c.cfg.seed));
    records = s.records;
    C = s.empirical_C;
    limit = s.sharp_limit;
    max_ratio = s.max_ratio;
  }
  io::write_ekp_csv(c.artifact(), records);
  auto summary = io::ekp_summary_json(C, limit, id);
  if (c.cfg.json) c.summary() << summary.dump(2) << '\n';
  else
    c.summary() << "measures=" << records.size() << " max_ratio=" << io::num(max_ratio) << " empirical_C=" << io::num(C)
                << " sharp_limit=" << io::num(limit) << " battery_id=" << id << '\n';
  return ok;
}

inline int cmd_sharpness(Ctx& c, const Source& src) {
  auto g = finite_only(src, "sharpness");
  auto [phi, psi] = functions(c.cfg, g);
  auto ts = c.cfg.grid.empty() ? dyadic_sequence(10) : parse_grid(c.cfg.grid);
  auto r = sharpness_sequence(phi, psi, ts);
  auto& a = c.artifact();
  a << "t,ratio,sharp_limit,relative_error\n";
  for (std::size_t i = 0; i < r.t.size(); ++i)
    a << io::num(r.t[i]) << ',' << io::num(r.records[i].ratio) << ',' << io::num(r.sharp_limit) << ','
      << io::num(r.relative_error[i]) << '\n';
  c.summary() << "sigma=" << io::num(r.sigma) << " sharp_limit=" << io::num(r.sharp_limit)
              << " last_relative_error=" << io::num(r.relative_error.back()) << '\n';
  return ok;
}

inline int cmd_escape(Ctx& c, const Source& src) {
  const auto& ls = loop_only(src, "escape");
  if (!ls.has_tail()) throw PreconditionError("escape: loop system has no tail, nothing escapes");
  std::size_t n_max = c.cfg.window ? static_cast<std::size_t>(*c.cfg.window) : 64;
  auto& a = c.artifact();
  a << "n,window_lo,window_hi,pressure,gap,base_mass,mean_length,ratio\n";
  auto v = is_spr(ls);
  if (v.verdict == SprVerdict::not_spr) {
    auto r = spr_necessity_demo(ls, LoopWeights::base_indicator(), 2.0, n_max);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const auto& e = r.escapes[i];
      a << e.n << ',' << e.window_lo << ',' << e.window_hi << ',' << io::num(e.pressure) << ',' << io::num(r.rows[i].gap)
        << ',' << io::num(e.base_mass) << ',' << io::num(e.mean_length) << ',' << io::num(r.rows[i].ratio) << '\n';
    }
    c.summary() << "non-SPR: P_G=" << io::num(r.P_G) << " final_ratio=" << io::num(r.final_ratio)
                << " normalized=" << io::num(r.final_normalized) << '\n';
    return ok;
  }
  double P = gurevich_entropy(ls);
  double ref = v.verdict == SprVerdict::spr ? parry_on_loops(ls).base_mass : 0.0;
  double worst_gap = std::numeric_limits<double>::infinity();
  for (auto n : doubling_schedule(n_max)) {
    auto e = escape_family(ls, n);
    double gap = std::max(0.0, P - e.pressure);
    worst_gap = std::min(worst_gap, gap);
    double ratio = gap > 0 ? std::abs(e.base_mass - ref) / std::sqrt(gap) : 0.0;
    a << e.n << ',' << e.window_lo << ',' << e.window_hi << ',' << io::num(e.pressure) << ',' << io::num(gap) << ','
      << io::num(e.base_mass) << ',' << io::num(e.mean_length) << ',' << io::num(ratio) << '\n';
  }
  c.summary() << to_string(v.verdict) << ": P_G=" << io::num(P) << " smallest_gap=" << io::num(worst_gap) << '\n';
  return ok;
}

inline std::string edges_label(const MarkovGraph& g, const std::vector<Edge>& es) {
  std::string s;
  for (std::size_t i = 0; i < es.size(); ++i) s += (i ? ";" : "") + g.id(es[i].first) + ">" + g.id(es[i].second);
  return s;
}

inline int cmd_zsplit(Ctx& c, const Source& src) {
  auto g = finite_only(src, "zsplit");
  std::size_t n_max = c.cfg.window ? static_cast<std::size_t>(*c.cfg.window) : 12;
  check_cap(n_max, c.cfg.cap);
  auto& a = c.artifact();
  a << "n,E0,E1,total,e0,e1,core,sub0,sub1,split_ok,identity_ok\n";
  std::size_t checks = 0, failures = 0;
  for (const auto& [E0, E1] : all_edge_partitions(*g, 0))
    for (std::size_t n = 1; n <= n_max; ++n) {
      auto r = zstar_split_exact(*g, 0, E0, E1, n, c.cfg.cap);
      ++checks;
      failures += !(r.split_ok && r.identity_ok);
      a << n << ',' << edges_label(*g, E0) << ',' << edges_label(*g, E1) << ',' << r.total << ',' << r.e0 << ','
        << r.e1 << ',' << r.core << ',' << r.sub0 << ',' << r.sub1 << ',' << (r.split_ok ? "true" : "false") << ','
        << (r.identity_ok ? "true" : "false") << '\n';
    }
  c.summary() << "vertex=" << g->id(0) << " checks=" << checks << " failures=" << failures << '\n';
  return failures ? numeric_error : ok;
}

}  // namespace detail

inline int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::Ctx c{cfg, out, err, {}};
  if (!(cfg.tol > 0)) throw PreconditionError("--tol must be positive");
  if (cfg.command == "ekp-scan") return detail::cmd_ekp_scan(c, cfg.graph);
  auto src = resolve_graph(cfg.graph);
  if (cfg.command == "pressure") return detail::cmd_pressure(c, src);
  if (cfg.command == "spr") return detail::cmd_spr(c, src);
  if (cfg.command == "curve") return detail::cmd_curve(c, src);
  if (cfg.command == "legendre") return detail::cmd_legendre(c, src);
  if (cfg.command == "sharpness") return detail::cmd_sharpness(c, src);
  if (cfg.command == "escape") return detail::cmd_escape(c, src);
  if (cfg.command == "zsplit") return detail::cmd_zsplit(c, src);
  throw ParseError("unknown command \"" + cfg.command + "\"");
}

// args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Thermodynamic formalism lab for topological Markov shifts", "tmslab"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::optional<double> window;
  const char* names[][2] = {{"pressure", "Gurevich pressure P_G"},
                            {"spr", "SPR verdict, discriminant and entropy"},
                            {"curve", "pressure curve CSV"},
                            {"legendre", "restricted pressure window CSV"},
                            {"ekp-scan", "EKP ratios over a measure family (--graph battery for the SPR battery)"},
                            {"sharpness", "tilted sharpness sequence"},
                            {"escape", "escape-to-infinity family on a loop system"},
                            {"zsplit", "exact Z* splitting over every edge partition at the first state"}};
  for (auto& [name, help] : names) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--graph", cfg.graph, "builtin:full:N | builtin:golden | loop:{...} | JSON | file");
    sub->add_option("--potential", cfg.potential, "const:x | indicator:ids | JSON | file (default 0)");
    sub->add_option("--observable", cfg.observable, "const:x | indicator:ids | JSON | file (default 1_[first state])");
    sub->add_option("--out", cfg.out, "artifact path (default stdout)");
    sub->add_option("--tol", cfg.tol, "eigensolver tolerance");
    sub->add_option("--grid", cfg.grid, "lo:hi:n");
    sub->add_option("--window", window, "legendre half width; escape and zsplit: largest n");
    sub->add_option("--seed", cfg.seed, "measure family seed");
    sub->add_option("--cap", cfg.cap, "enumeration cap");
    sub->add_flag("--json", cfg.json, "JSON output");
    sub->callback([&cfg, sub] { cfg.command = sub->get_name(); });
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return parse_error;
  }
  cfg.window = window;
  try {
    return execute(cfg, out, err);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return parse_error;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return precondition_error;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return numeric_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return numeric_error;
  }
}

}  // namespace tms::cli
