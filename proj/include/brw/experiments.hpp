#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "brw/config.hpp"

namespace brw {

inline constexpr const char* kArtifactVersion = "1.0.0";

/// One comparison made by a suite. Asserted checks decide the exit code;
/// the others are diagnostics.
struct Check {
  std::string name;
  bool asserted = true;
  bool passed = false;
  double value = 0.0;
  double reference = 0.0;
  /// SE allowance that was added to the reference, 0 for exact checks.
  double margin = 0.0;
  std::string detail;
};

/// Plot-ready row: grid parameter, statistic name, value and SE.
struct LongRow {
  std::string grid;
  double x = 0.0;
  std::string statistic;
  double value = 0.0;
  double se = 0.0;
};

struct RunRecord {
  std::string suite;
  nlohmann::json config;
  std::uint64_t seed = 0;
  nlohmann::json estimates = nlohmann::json::object();
  nlohmann::json reports = nlohmann::json::array();
  std::vector<Check> checks;
  std::vector<LongRow> rows;
  std::vector<std::string> warnings;
  /// Matrix-layout CSV files keyed by file suffix.
  std::vector<std::pair<std::string, std::string>> tables;
  double wall_clock_seconds = 0.0;

  bool passed() const;
  const Check* find_check(const std::string& name) const;
  nlohmann::json to_json(bool with_wall_clock = true) const;
};

RunRecord run_yaglom(const ExperimentConfig& cfg);
RunRecord run_theorem1(const ExperimentConfig& cfg);
RunRecord run_theorem3(const ExperimentConfig& cfg);
RunRecord run_decomposition_gap(const ExperimentConfig& cfg);
RunRecord run_random_sum_suite(const ExperimentConfig& cfg);
RunRecord run_clt_suite(const ExperimentConfig& cfg);
RunRecord run_estimate_kappa(const ExperimentConfig& cfg);
RunRecord run_estimate_sigma(const ExperimentConfig& cfg);
RunRecord run_survival(const ExperimentConfig& cfg);

/// Validates the config and runs the suite it names.
RunRecord run_experiment(const ExperimentConfig& cfg);

/// Appends the record to <dir>/<suite>.jsonl and rewrites <suite>_summary.csv,
/// <suite>_long.csv and the suite's matrix tables.
void write_outputs(const RunRecord& record, const std::filesystem::path& dir);

/// Least-squares slope of log(y) against log(x) over the points with y > 0.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace brw
