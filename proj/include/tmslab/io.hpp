#pragma once

#include <charconv>
#include <fstream>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tmslab/ekp.hpp"

namespace tms::io {

using json = nlohmann::ordered_json;

// Shortest round-trip is not wanted here: fixed 15 significant digits,
// independent of the global locale.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 15);
  return std::string(buf, r.ptr);
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line, col = 1;
    else ++col;
  }
  return {line, col};
}

inline json parse_json(const std::string& text, const std::string& origin = "<inline>") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    auto p = what.find("column");
    p = p == std::string::npos ? p : what.find(": ", p);
    throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                     (p == std::string::npos ? what : what.substr(p + 2)));
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path);
}

// Relaxed inline form: {f:{1:1,2:1}} -> {"f":{"1":1,"2":1}}.
inline std::string quote_bare_keys(const std::string& s) {
  static const std::regex key(R"(([\{,]\s*)([A-Za-z0-9_.+\-]+)\s*:)");
  return std::regex_replace(s, key, "$1\"$2\":");
}

namespace detail {

[[noreturn]] inline void bad(const std::string& where, const std::string& msg) { throw ParseError(where + ": " + msg); }

inline const json& field(const json& j, const char* k, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  auto it = j.find(k);
  if (it == j.end()) bad(where, std::string("missing key \"") + k + "\"");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where, "expected a number");
  return j.get<double>();
}

inline std::size_t length_key(const std::string& k, const std::string& where) {
  std::size_t v = 0;
  auto r = std::from_chars(k.data(), k.data() + k.size(), v);
  if (r.ec != std::errc{} || r.ptr != k.data() + k.size() || v == 0)
    bad(where, "loop length key \"" + k + "\" is not a positive integer");
  return v;
}

inline std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') out.push_back(cur), cur.clear();
    else cur += c;
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

// ---- graphs

inline MarkovGraph graph_from_json(const json& j, const std::string& where = "graph") {
  auto type = detail::field(j, "type", where);
  if (!type.is_string()) detail::bad(where, "\"type\" must be a string");
  auto t = type.get<std::string>();
  if (t == "builtin") {
    auto name = detail::field(j, "name", where);
    if (name == "full") {
      auto n = detail::field(j, "n", where);
      if (!n.is_number_unsigned() || n.get<std::size_t>() == 0) detail::bad(where, "\"n\" must be a positive integer");
      return MarkovGraph::full_shift(n.get<std::size_t>());
    }
    if (name == "golden") return MarkovGraph::golden_mean();
    detail::bad(where, "unknown builtin graph " + name.dump());
  }
  if (t != "finite") detail::bad(where, "unknown graph type \"" + t + "\"");
  const auto& st = detail::field(j, "states", where);
  const auto& ed = detail::field(j, "edges", where);
  if (!st.is_array() || !ed.is_array()) detail::bad(where, "\"states\" and \"edges\" must be arrays");
  std::vector<std::string> states;
  for (const auto& s : st) {
    if (!s.is_string()) detail::bad(where, "state identifiers must be strings");
    states.push_back(s.get<std::string>());
  }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : ed) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
      detail::bad(where, "each edge must be a pair of state identifiers");
    edges.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
  }
  return MarkovGraph::from_edges(std::move(states), edges);
}

inline json graph_to_json(const MarkovGraph& g) {
  json j;
  j["type"] = "finite";
  j["states"] = json::array();
  for (StateIndex a = 0; a < g.size(); ++a) j["states"].push_back(g.id(a));
  j["edges"] = json::array();
  for (auto [u, v] : g.edges()) j["edges"].push_back({g.id(u), g.id(v)});
  return j;
}

// ---- potentials and observables

inline LocallyConstantFunction potential_from_json(const json& j, const GraphPtr& g, const std::string& where = "potential") {
  const auto& mem = detail::field(j, "memory", where);
  if (!mem.is_number_unsigned() || mem.get<std::size_t>() == 0) detail::bad(where, "\"memory\" must be a positive integer");
  std::size_t m = mem.get<std::size_t>();
  double def = j.contains("default") ? detail::number(j["default"], where + ".default") : 0.0;
  LocallyConstantFunction f(g, m, def);
  if (j.contains("values")) {
    const auto& vals = j["values"];
    if (!vals.is_object()) detail::bad(where, "\"values\" must be an object");
    for (const auto& [k, v] : vals.items()) {
      auto ids = detail::split_ids(k);
      if (ids.size() != m) detail::bad(where, "word \"" + k + "\" has length " + std::to_string(ids.size()) + ", memory is " + std::to_string(m));
      std::vector<StateIndex> w;
      for (const auto& id : ids) {
        if (!g->find(id)) detail::bad(where, "word \"" + k + "\" uses unknown state \"" + id + "\"");
        w.push_back(g->index(id));
      }
      if (!g->is_admissible(w)) detail::bad(where, "word \"" + k + "\" is not admissible");
      f.set(w, detail::number(v, where + "." + k));
    }
  }
  return f;
}

inline json potential_to_json(const LocallyConstantFunction& f) {
  json j;
  j["memory"] = f.memory();
  j["default"] = 0.0;
  j["values"] = json::object();
  const auto& g = f.graph();
  f.for_each_word([&](std::span<const StateIndex> w, double v) {
    std::string k;
    for (std::size_t i = 0; i < w.size(); ++i) k += (i ? "," : "") + g.id(w[i]);
    j["values"][k] = v;
  });
  return j;
}

// ---- loop systems

inline LoopSystem loop_from_json(const json& j, const std::string& where = "loop") {
  if (j.contains("type") && j["type"] != "loop") detail::bad(where, "\"type\" must be \"loop\"");
  std::map<std::size_t, long long> f;
  const auto& fj = detail::field(j, "f", where);
  if (!fj.is_object()) detail::bad(where, "\"f\" must be an object of length: count");
  for (const auto& [k, v] : fj.items()) {
    if (!v.is_number_integer()) detail::bad(where, "f[" + k + "] must be an integer");
    f[detail::length_key(k, where)] = v.get<long long>();
  }
  std::optional<LoopTail> tail;
  if (j.contains("tail")) {
    const auto& t = j["tail"];
    LoopTail lt;
    lt.c = detail::number(detail::field(t, "c", where + ".tail"), where + ".tail.c");
    lt.rho = detail::number(detail::field(t, "rho", where + ".tail"), where + ".tail.rho");
    lt.alpha = detail::number(detail::field(t, "alpha", where + ".tail"), where + ".tail.alpha");
    const auto& from = detail::field(t, "from", where + ".tail");
    if (!from.is_number_unsigned()) detail::bad(where, "tail.from must be a positive integer");
    lt.from = from.get<std::size_t>();
    tail = lt;
  }
  LoopWeights w;
  if (j.contains("weights")) {
    const auto& wj = j["weights"];
    if (!wj.is_object()) detail::bad(where, "\"weights\" must be an object");
    for (const auto& [k, v] : wj.items()) {
      if (k == "default") w.constant = detail::number(v, where + ".weights.default");
      else w.values[detail::length_key(k, where)] = detail::number(v, where + ".weights." + k);
    }
  }
  return LoopSystem(std::move(f), tail, std::move(w));
}

inline json loop_to_json(const LoopSystem& ls) {
  json j;
  j["type"] = "loop";
  j["f"] = json::object();
  for (auto [n, c] : ls.explicit_part()) j["f"][std::to_string(n)] = c;
  if (ls.tail()) {
    const auto& t = *ls.tail();
    j["tail"] = {{"c", t.c}, {"rho", t.rho}, {"alpha", t.alpha}, {"from", t.from}};
  }
  const auto& w = ls.weights();
  if (w.constant != 0 || !w.values.empty()) {
    j["weights"] = json::object();
    if (w.constant != 0) j["weights"]["default"] = w.constant;
    for (auto [n, v] : w.values) j["weights"][std::to_string(n)] = v;
  }
  return j;
}

// ---- measures

inline json measure_to_json(const MarkovMeasure& mu) {
  json j;
  const auto& g = *mu.base;
  j["alphabet"] = json::array();
  for (const auto& w : mu.alphabet) {
    std::string k;
    for (std::size_t i = 0; i < w.size(); ++i) k += (i ? "," : "") + g.id(w[i]);
    j["alphabet"].push_back(k);
  }
  j["pi"] = mu.pi;
  json P = json::array();
  for (std::size_t a = 0; a < mu.size(); ++a) {
    std::vector<double> row(mu.size(), 0.0);
    for (auto [b, v] : mu.P[a]) row[b] = v;
    P.push_back(row);
  }
  j["P"] = std::move(P);
  j["provenance"] = mu.provenance;
  return j;
}

inline MarkovMeasure measure_from_json(const json& j, const GraphPtr& g, const std::string& where = "measure") {
  const auto& al = detail::field(j, "alphabet", where);
  const auto& pi = detail::field(j, "pi", where);
  const auto& P = detail::field(j, "P", where);
  if (!al.is_array() || al.empty()) detail::bad(where, "\"alphabet\" must be a nonempty array");
  std::vector<std::vector<StateIndex>> alphabet;
  for (const auto& a : al) {
    if (!a.is_string()) detail::bad(where, "alphabet entries are comma-joined state identifiers");
    std::vector<StateIndex> w;
    for (const auto& id : detail::split_ids(a.get<std::string>())) {
      if (!g->find(id)) detail::bad(where, "unknown state \"" + id + "\"");
      w.push_back(g->index(id));
    }
    alphabet.push_back(std::move(w));
  }
  std::size_t n = alphabet.size(), order = alphabet[0].size();
  if (!pi.is_array() || pi.size() != n || !P.is_array() || P.size() != n) detail::bad(where, "pi and P must match the alphabet size");
  std::vector<double> pv;
  for (const auto& x : pi) pv.push_back(detail::number(x, where + ".pi"));
  SparseRows rows(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (!P[a].is_array() || P[a].size() != n) detail::bad(where, "P must be square");
    for (std::size_t b = 0; b < n; ++b) {
      double v = detail::number(P[a][b], where + ".P");
      if (v != 0) rows[a].emplace_back(b, v);
    }
  }
  std::string prov = j.contains("provenance") && j["provenance"].is_string() ? j["provenance"].get<std::string>() : "markov";
  auto mu = MarkovMeasure::make(g, order, std::move(alphabet), std::move(rows), std::move(pv), MeasureKind::markov, prov);
  mu.validate(1e-10);
  return mu;
}

// ---- CSV

inline void write_curve_csv(std::ostream& os, const PressureCurve& c) {
  os << "t,p,p1,p2_fd,p2_gk\n";
  for (std::size_t i = 0; i < c.t.size(); ++i)
    os << num(c.t[i]) << ',' << num(c.p[i]) << ',' << num(c.p1[i]) << ',' << num(c.p2_fd[i]) << ',' << num(c.p2_gk[i]) << '\n';
}

inline void write_legendre_csv(std::ostream& os, const LegendreData& d) {
  os << "a,t_of_a,q,q1,q2\n";
  for (const auto& s : d.samples)
    os << num(s.a) << ',' << num(s.t_of_a) << ',' << num(s.q) << ',' << num(s.q1) << ',' << num(s.q2) << '\n';
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
  return o + "\"";
}

inline void write_ekp_csv(std::ostream& os, const std::vector<EKPRecord>& rs) {
  os << "provenance,int_psi_mu,int_psi_m,P_mu,P_G,gap,ratio,sigma,holder_norm\n";
  for (const auto& r : rs)
    os << csv_field(r.provenance) << ',' << num(r.int_psi_mu) << ',' << num(r.int_psi_m) << ',' << num(r.P_mu) << ','
       << num(r.P_G) << ',' << num(r.gap) << ',' << num(r.ratio) << ',' << num(r.sigma) << ',' << num(r.holder_norm) << '\n';
}

inline json ekp_summary_json(double empirical_C, double sharp_limit, const std::string& battery_id) {
  json j;
  j["empirical_C"] = empirical_C;
  j["sharp_limit"] = sharp_limit;
  j["battery_id"] = battery_id;
  return j;
}

}  // namespace tms::io
