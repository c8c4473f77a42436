#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tmslab/cli.hpp"

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = tms::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("tmslab_cli_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, PressureOfFullShift) {
  auto r = run({"pressure", "--graph", "builtin:full:2"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0.693147180559945\n");
}

TEST(Cli, SprOnGoldenLoops) {
  auto r = run({"spr", "--graph", "loop:{f:{1:1,2:1}}"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("SPR=true"), std::string::npos);
  EXPECT_NE(r.out.find("h=0.481211825"), std::string::npos);
  auto n = run({"spr", "--graph", "loop:{f:{},tail:{c:0.05,rho:0.25,alpha:3,from:2}}"});
  EXPECT_NE(n.out.find("SPR=false"), std::string::npos) << n.out << n.err;
  EXPECT_NE(n.out.find("h=1.38629436111989"), std::string::npos);
}

TEST(Cli, CurveCsvIsDeterministic) {
  auto a = temp_path("a.csv"), b = temp_path("b.csv");
  auto r1 = run({"curve", "--graph", "builtin:golden", "--grid", "-1:1:5", "--out", a});
  auto r2 = run({"curve", "--graph", "builtin:golden", "--grid", "-1:1:5", "--out", b});
  EXPECT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r2.code, 0);
  auto s = slurp(a);
  EXPECT_EQ(s, slurp(b));
  EXPECT_EQ(s.substr(0, s.find('\n')), "t,p,p1,p2_fd,p2_gk");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 6);
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST(Cli, LegendreAndSharpness) {
  auto l = run({"legendre", "--graph", "builtin:full:2", "--window", "0.2"});
  EXPECT_EQ(l.code, 0) << l.err;
  EXPECT_EQ(l.out.substr(0, l.out.find('\n')), "a,t_of_a,q,q1,q2");
  auto s = run({"sharpness", "--graph", "builtin:golden", "--observable", "indicator:2"});
  EXPECT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.out.substr(0, s.out.find('\n')), "t,ratio,sharp_limit,relative_error");
}

TEST(Cli, EkpScanOnBernoulliBattery) {
  auto csv = temp_path("ekp.csv");
  auto r = run({"ekp-scan", "--graph", "builtin:full:2", "--out", csv, "--json"});
  EXPECT_EQ(r.code, 0) << r.err;
  auto j = tms::io::parse_json(r.out);
  EXPECT_NEAR(j["sharp_limit"].get<double>(), 0.7071067811865476, 1e-12);
  EXPECT_TRUE(j.contains("empirical_C") && j.contains("battery_id"));
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "provenance,int_psi_mu,int_psi_m,P_mu,P_G,gap,ratio,sigma,holder_norm");
  double best = 0;
  std::string best_row;
  while (std::getline(in, line)) {
    auto cells = line;
    // ratio is the third field from the end
    std::vector<std::string> f;
    std::string cur;
    bool quoted = false;
    for (char c : cells) {
      if (c == '"') quoted = !quoted;
      else if (c == ',' && !quoted) f.push_back(cur), cur.clear();
      else cur += c;
    }
    f.push_back(cur);
    ASSERT_EQ(f.size(), 9u) << line;
    double ratio = std::stod(f[6]);
    if (ratio > best) best = ratio, best_row = f[0];
  }
  EXPECT_NEAR(best, 0.7071, 5e-4);
  EXPECT_EQ(best_row.rfind("bernoulli(0.4", 0), 0u) << best_row;
  std::remove(csv.c_str());
}

TEST(Cli, EscapeAndZsplit) {
  auto e = run({"escape", "--graph", "loop:{f:{},tail:{c:0.05,rho:0.25,alpha:3,from:2}}", "--window", "16"});
  EXPECT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(std::count(e.out.begin(), e.out.end(), '\n'), 4);  // header + n = 4, 8, 16
  auto z = run({"zsplit", "--graph", "builtin:golden", "--window", "8"});
  EXPECT_EQ(z.code, 0) << z.err;
  EXPECT_NE(z.err.find("failures=0"), std::string::npos);
  EXPECT_EQ(z.out.find("false"), std::string::npos);
}

TEST(Cli, SpecFilesAreAccepted) {
  auto g = temp_path("g.json"), p = temp_path("p.json");
  std::ofstream(g) << R"({"type":"finite","states":["1","2"],"edges":[["1","1"],["1","2"],["2","1"]]})";
  std::ofstream(p) << R"({"memory":2,"default":0.0,"values":{"1,2":-0.5,"1,1":0.25}})";
  auto r = run({"pressure", "--graph", g, "--potential", p});
  EXPECT_EQ(r.code, 0) << r.err;
  // lambda solves x^2 = e^{.25} x + e^{-.5}
  double a = std::exp(0.25), b = std::exp(-0.5);
  double lam = (a + std::sqrt(a * a + 4 * b)) / 2;
  EXPECT_NEAR(std::stod(r.out), std::log(lam), 1e-13);
  std::remove(g.c_str());
  std::remove(p.c_str());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"pressure", "--tol"}).code, 1);
  auto bad = run({"pressure", "--graph", "{\"type\":\"finite\",}"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("--graph:1:"), std::string::npos) << bad.err;
  EXPECT_EQ(run({"curve", "--grid", "1:0:3"}).code, 1);
  EXPECT_EQ(run({"pressure", "--tol", "-1"}).code, 2);
  EXPECT_EQ(run({"escape", "--graph", "builtin:golden"}).code, 2);
  EXPECT_EQ(run({"spr", "--graph", "loop:{f:{1:1,2:1},tail:{c:1,rho:1,alpha:2,from:3}}"}).code, 2);
  EXPECT_EQ(run({"sharpness", "--graph", "builtin:full:2", "--observable", "const:1"}).code, 2);
  EXPECT_EQ(run({"zsplit", "--graph", "builtin:golden", "--window", "80"}).code, 2);
  EXPECT_EQ(run({"pressure", "--graph", "/nonexistent/spec.json"}).code, 1);
}
