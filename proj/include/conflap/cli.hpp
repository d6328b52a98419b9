#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "conflap/report.hpp"

namespace conflap::cli {

inline constexpr const char* toolkit_version = "0.1.0";

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  bool reproducible = false;
  std::optional<unsigned> threads;
  /// Tolerance overrides by key (solver_tol, cluster_tol, cert_tol, opt_tol).
  std::map<std::string, double> tolerances;
};

/// Reads CONFLAP_SOLVER_TOL, CONFLAP_CLUSTER_TOL, CONFLAP_CERT_TOL, CONFLAP_OPT_TOL.
std::map<std::string, double> tolerance_env_overrides();

/// Fills defaults and validates; throws std::invalid_argument on unknown keys
/// or malformed values. The result is what reports embed as "config".
json resolve_config(const json& raw, const Overrides& ov = {});

struct Outcome {
  int exit_code = 0;  // 0 ok, 2 hypothesis violation, 1 internal error
  json report;
  /// Extra output files keyed by file name (sweep and trace CSVs).
  std::map<std::string, std::string> files;
};

/// Runs one experiment. Never throws: failures are reported in the outcome.
Outcome run(const json& raw_config, const Overrides& ov = {});

}  // namespace conflap::cli
