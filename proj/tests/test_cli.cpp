#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "conflap/cli.hpp"

using namespace conflap;
namespace fs = std::filesystem;

namespace {

const double six_pi_cubed = 6 * std::pow(std::numbers::pi, 3);

json small_torus() { return {{"type", "torus"}, {"grid", {8, 8, 8}}}; }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("conflap_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_binary(const fs::path& config, const fs::path& out, const std::string& extra = "") {
  const std::string cmd = std::string(CONFLAP_CLI_PATH) + " --config " + config.string() + " --out " + out.string() +
                          " " + extra + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, UnknownKeysRejected) {
  EXPECT_EQ(cli::run({{"task", "maximize"}, {"bogus", 1}}).exit_code, 1);
  EXPECT_EQ(cli::run({{"task", "maximize"}, {"backend", {{"type", "torus"}, {"grid", {8, 8, 8}}, {"x", 1}}}}).exit_code,
            1);
  EXPECT_EQ(cli::run({{"task", "maximize"}, {"tolerances", {{"solve_tol", 1e-9}}}}).exit_code, 1);
  EXPECT_EQ(cli::run({{"task", "nonsense"}}).exit_code, 1);
  EXPECT_EQ(cli::run({{"task", "eval"}, {"curvature", "sin(("}}).exit_code, 1);
}

TEST(Config, DefaultsEmbedded) {
  const json c = cli::resolve_config({{"task", "eval"}});
  EXPECT_EQ(c["backend"]["type"], "torus");
  EXPECT_EQ(c["backend"]["grid"], json({16, 16, 16}));
  EXPECT_EQ(c["k"], 1);
  EXPECT_EQ(c["tolerances"]["solver_tol"], 1e-9);
}

TEST(Config, EnvironmentOverrides) {
  ::setenv("CONFLAP_CERT_TOL", "1e-6", 1);
  const auto env = cli::tolerance_env_overrides();
  ::unsetenv("CONFLAP_CERT_TOL");
  ASSERT_EQ(env.count("cert_tol"), 1u);
  cli::Overrides ov;
  ov.tolerances = env;
  EXPECT_EQ(cli::resolve_config({{"task", "certify"}}, ov)["tolerances"]["cert_tol"], 1e-6);
  ::setenv("CONFLAP_OPT_TOL", "abc", 1);
  EXPECT_THROW(cli::tolerance_env_overrides(), std::invalid_argument);
  ::unsetenv("CONFLAP_OPT_TOL");
}

TEST(Tasks, MaximizeFlatTorus) {
  const cli::Outcome o = cli::run({{"task", "maximize"}, {"backend", small_torus()}});
  ASSERT_EQ(o.exit_code, 0) << o.report.dump();
  EXPECT_NEAR(o.report["result"]["Lambda1"].get<double>(), six_pi_cubed, 1e-9);
  EXPECT_EQ(o.report["status"], "ok");
  EXPECT_EQ(o.report["toolkit_version"], cli::toolkit_version);
}

TEST(Tasks, HypothesisViolationsExitTwo) {
  const cli::Outcome sign = cli::run({{"task", "certify"}, {"backend", small_torus()}, {"curvature", "sin(x1)"}});
  EXPECT_EQ(sign.exit_code, 2);
  EXPECT_EQ(sign.report["tag"], "necessary_condition_sign");
  const cli::Outcome gap = cli::run({{"task", "derivative"}, {"backend", {{"type", "sphere3"}}}, {"k", 3}});
  EXPECT_EQ(gap.exit_code, 2);
  EXPECT_EQ(gap.report["tag"], "gap_condition");
}

TEST(Tasks, ScaleSweepIsFlat) {
  const cli::Outcome o = cli::run({{"task", "sweep"},
                                   {"backend", small_torus()},
                                   {"factor", "exp(0.2*sin(x1))"},
                                   {"sweep", {{"axis", "scale"}, {"values", {0.5, 1.0, 2.0, 7.0}}}}});
  ASSERT_EQ(o.exit_code, 0) << o.report.dump();
  const auto rows = csv_rows(o.files.at("sweep.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0][0], "index");
  const double F0 = std::stod(rows[1][4]);
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_NEAR(std::stod(rows[i][4]), F0, 1e-9 * std::abs(F0));
}

TEST(Tasks, SeedSweepBelowMaximum) {
  const cli::Outcome o = cli::run({{"task", "sweep"},
                                   {"backend", small_torus()},
                                   {"curvature", "6 + 2*sin(x1)"},
                                   {"sampler", {{"amplitude", 0.5}}},
                                   {"threads", 4},
                                   {"sweep", {{"axis", "seed"}, {"range", {1, 200}}}}});
  ASSERT_EQ(o.exit_code, 0) << o.report.dump();
  const auto rows = csv_rows(o.files.at("sweep.csv"));
  ASSERT_EQ(rows.size(), 201u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::stoul(rows[i][0]), i - 1);
    EXPECT_LE(std::stod(rows[i][4]), six_pi_cubed * (1 + 1e-9));
  }
}

TEST(Tasks, TSweepApproachesDerivative) {
  const json base = {{"backend", small_torus()}, {"curvature", "6 + 2*sin(x1)"}, {"factor", "exp(0.3*sin(x1))"}, {"direction", "sin(x1)"}};
  json sweep = base;
  sweep["task"] = "sweep";
  sweep["sweep"] = {{"axis", "t"}, {"values", {-1e-5, 1e-5}}};
  json deriv = base;
  deriv["task"] = "derivative";
  const cli::Outcome s = cli::run(sweep), d = cli::run(deriv);
  ASSERT_EQ(s.exit_code, 0) << s.report.dump();
  ASSERT_EQ(d.exit_code, 0) << d.report.dump();
  const auto rows = csv_rows(s.files.at("sweep.csv"));
  const double left = std::stod(rows[1][5]), right = std::stod(rows[2][5]);
  const double F_right = d.report["result"]["F_right"], F_left = d.report["result"]["F_left"];
  ASSERT_GT(std::abs(F_right), 1.0);
  EXPECT_NEAR(right, F_right, 1e-3 * std::abs(F_right));
  EXPECT_NEAR(left, F_left, 1e-3 * std::abs(F_left));
  EXPECT_EQ(std::stod(rows[1][6]), F_right);
}

TEST(Binary, ReportsAreReproducible) {
  const fs::path dir = scratch("repro");
  const json cfg = {{"task", "eval"},
                    {"backend", small_torus()},
                    {"sampler", {{"samples", 8}}},
                    {"output", {{"report", "r.json"}, {"trace", "t.csv"}}}};
  std::ofstream(dir / "cfg.json") << cfg.dump();
  ASSERT_EQ(run_binary(dir / "cfg.json", dir / "a", "--threads 3"), 0);
  ASSERT_EQ(run_binary(dir / "cfg.json", dir / "b", "--threads 1"), 0);
  EXPECT_FALSE(slurp(dir / "a" / "r.json").empty());
  EXPECT_EQ(slurp(dir / "a" / "t.csv"), slurp(dir / "b" / "t.csv"));
  ASSERT_EQ(run_binary(dir / "cfg.json", dir / "c", "--threads 3"), 0);
  EXPECT_EQ(slurp(dir / "a" / "r.json"), slurp(dir / "c" / "r.json"));
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("codes");
  std::ofstream(dir / "bad.json") << R"J({"task": "maximize", "typo": 1})J";
  std::ofstream(dir / "sign.json") << R"J({"task": "maximize", "backend": {"grid": [8, 8, 8]}, "curvature": "sin(x1)"})J";
  std::ofstream(dir / "ok.json") << R"J({"task": "maximize", "backend": {"grid": [8, 8, 8]}})J";
  EXPECT_EQ(run_binary(dir / "bad.json", dir), 1);
  EXPECT_EQ(run_binary(dir / "sign.json", dir), 2);
  EXPECT_EQ(run_binary(dir / "ok.json", dir), 0);
  const json rep = json::parse(slurp(dir / "report.json"));
  EXPECT_NEAR(rep["result"]["Lambda1"].get<double>(), six_pi_cubed, 1e-9);
}
