#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "conflap/cli.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Conformal Laplacian eigenvalue toolkit"};
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool reproducible = false;
  app.add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "directory for report and CSV files");
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads for samples and sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--reproducible", reproducible, "force reproducible=true");
  CLI11_PARSE(app, argc, argv);

  conflap::cli::Overrides ov;
  if (*seed_opt) ov.seed = seed;
  if (*threads_opt) ov.threads = threads;
  ov.reproducible = reproducible;

  conflap::json config;
  try {
    ov.tolerances = conflap::cli::tolerance_env_overrides();
    std::ifstream in(config_path);
    config = conflap::json::parse(in);
  } catch (const std::exception& e) {
    std::cerr << "conflap: " << e.what() << "\n";
    return 1;
  }

  const conflap::cli::Outcome outcome = conflap::cli::run(config, ov);
  try {
    fs::create_directories(out_dir);
    std::string report_name = "report.json";
    if (outcome.report.contains("config") && outcome.report["config"].contains("output"))
      report_name = outcome.report["config"]["output"].value("report", report_name);
    std::ofstream(fs::path(out_dir) / report_name) << outcome.report.dump(2) << "\n";
    for (const auto& [name, content] : outcome.files) std::ofstream(fs::path(out_dir) / name) << content;
  } catch (const std::exception& e) {
    std::cerr << "conflap: cannot write outputs: " << e.what() << "\n";
    return 1;
  }
  if (outcome.exit_code != 0) {
    std::cerr << "conflap: " << outcome.report.value("status", "error");
    if (outcome.report.contains("tag")) std::cerr << " [" << outcome.report["tag"].get<std::string>() << "]";
    std::cerr << ": " << outcome.report.value("message", "") << "\n";
  }
  return outcome.exit_code;
}
