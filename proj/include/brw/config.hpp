#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "brw/offspring_law.hpp"

namespace brw {

/// Offspring law as written in a config: a built-in name with parameters or an inline pmf.
struct LawSpec {
  std::string name = "binary";
  double p = 0.5;
  double lambda = 1.0;
  std::uint32_t cutoff = 0;
  std::map<std::uint32_t, double> pmf;

  OffspringLaw build() const;
};

struct Threshold {
  double value = 0.0;
  std::string note;
};

struct ExperimentConfig {
  std::string experiment;
  LawSpec law;
  int d = 3;
  std::vector<int> n_grid;
  int r = 1;
  /// Intermediate generation of the decomposition suite.
  int m = 0;
  std::size_t trials = 0;
  /// Trees in the batch that fixes kappa and A; 0 means `trials`.
  std::size_t kappa_trials = 0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output_dir = "results";
  std::string sampler = "pruned";
  std::size_t ot_cap = 512;
  int replicates = 20;
  int bootstrap = 20;
  std::size_t matching_n = 512;
  /// 0 selects the documented default of the bound calculators.
  double c_r = 0.0;
  double c_mvn = 0.0;
  std::vector<double> p_grid;
  std::vector<int> clt_n;
  std::vector<double> eps_grid;
  std::vector<std::vector<double>> mvn_base;
  std::vector<int> d_grid;
  std::vector<std::string> summands;
  std::string gap_convention = "in_tree";
  bool exploratory = false;
  std::map<std::string, Threshold> thresholds;

  double threshold(const std::string& key) const;
  std::size_t estimate_trials() const { return kappa_trials ? kappa_trials : trials; }
};

const std::vector<std::string>& suite_names();
bool is_occupancy_suite(const std::string& experiment);

/// Defaults of one suite; throws Config for an unknown name.
ExperimentConfig default_config(const std::string& experiment);

/// Overlays the keys of `j` on the defaults of `experiment` (or of j["experiment"]
/// when `experiment` is empty). Unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& experiment = "");
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& experiment = "");

/// Throws Error(Config) with a message naming the offending field.
void validate(const ExperimentConfig& cfg);

/// All fields except the thread count and the output directory.
nlohmann::json snapshot(const ExperimentConfig& cfg);

nlohmann::json law_to_json(const LawSpec& law);

}  // namespace brw
