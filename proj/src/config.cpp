#include "brw/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "brw/error.hpp"
#include "brw/estimators.hpp"

namespace brw {

namespace {

using nlohmann::json;

Error config_error(const std::string& what) { return Error(ErrorKind::config, what); }

void set_threshold(ExperimentConfig& c, const std::string& key, double value, std::string note) {
  c.thresholds[key] = Threshold{value, std::move(note)};
}

const char* kMarginNote = "number of standard errors required for an asserted comparison";

LawSpec parse_law(const json& j) {
  LawSpec law;
  if (j.is_string()) {
    law.name = j.get<std::string>();
    return law;
  }
  if (!j.is_object()) throw config_error("law must be a name or an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "name") {
      law.name = value.get<std::string>();
    } else if (key == "p") {
      law.p = value.get<double>();
    } else if (key == "lambda") {
      law.lambda = value.get<double>();
    } else if (key == "cutoff") {
      law.cutoff = value.get<std::uint32_t>();
    } else if (key == "pmf") {
      law.name = "custom";
      if (!value.is_object()) throw config_error("law.pmf must map offspring counts to probabilities");
      for (const auto& [k, prob] : value.items()) {
        std::size_t used = 0;
        unsigned long count = 0;
        try {
          count = std::stoul(k, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != k.size()) throw config_error("law.pmf key '" + k + "' is not a non-negative integer");
        law.pmf[static_cast<std::uint32_t>(count)] = prob.get<double>();
      }
    } else {
      throw config_error("unknown law field '" + key + "'");
    }
  }
  if (law.name == "custom" && law.pmf.empty()) throw config_error("custom law needs a pmf");
  return law;
}

std::vector<std::vector<double>> parse_matrix(const json& j) {
  auto rows = j.get<std::vector<std::vector<double>>>();
  for (const auto& row : rows) {
    if (row.size() != rows.size()) throw config_error("mvn_base must be a square matrix");
  }
  return rows;
}

template <class T>
bool strictly_increasing(const std::vector<T>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](T a, T b) { return !(a < b); }) == v.end();
}

}  // namespace

OffspringLaw LawSpec::build() const {
  if (name == "binary") return OffspringLaw::binary();
  if (name == "geometric") return OffspringLaw::geometric(p, cutoff);
  if (name == "poisson") return OffspringLaw::poisson(lambda);
  if (name == "custom") return OffspringLaw::make(pmf, "custom");
  throw config_error("unknown law '" + name + "' (binary, geometric, poisson or an inline pmf)");
}

double ExperimentConfig::threshold(const std::string& key) const {
  const auto it = thresholds.find(key);
  if (it == thresholds.end()) throw config_error("missing threshold '" + key + "' for " + experiment);
  return it->second.value;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"yaglom",     "theorem1", "theorem3",       "decomposition",
                                              "random-sum", "clt",      "estimate-kappa", "estimate-sigma",
                                              "survival"};
  return names;
}

bool is_occupancy_suite(const std::string& e) {
  return e == "theorem1" || e == "theorem3" || e == "decomposition" || e == "estimate-kappa" ||
         e == "estimate-sigma";
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  set_threshold(c, "se_margin", 3.0, kMarginNote);
  if (experiment == "yaglom") {
    c.law.name = "geometric";
    c.n_grid = {100, 200, 500, 1000};
    c.trials = 400000;
    set_threshold(c, "max_distance", 0.05,
                  "pilot runs with 1e5 samples gave W1 of about 0.004 at n = 1000 (geometric law)");
    set_threshold(c, "slope_low", -1.3, "fitted log-log slope range, reported only");
    set_threshold(c, "slope_high", -0.7, "fitted log-log slope range, reported only");
  } else if (experiment == "theorem1") {
    c.d = 3;
    c.r = 2;
    c.n_grid = {100, 200, 400, 800};
    c.trials = 100000;
    c.replicates = 40;
  } else if (experiment == "theorem3") {
    c.d = 7;
    c.r = 1;
    c.n_grid = {100, 200, 400};
    c.trials = 200000;
    set_threshold(c, "variance_tolerance", 0.15,
                  "relative gap between the per-tree variance at the largest n and the target variance");
    set_threshold(c, "swap_se_margin", 2.0, "allowed shift when mu_n replaces kappa, in standard errors");
    set_threshold(c, "fourth_ratio_low", 0.85, "lower end of the fourth-moment ratio band");
    set_threshold(c, "fourth_ratio_high", 1.15, "upper end of the fourth-moment ratio band");
  } else if (experiment == "decomposition") {
    c.d = 3;
    c.r = 1;
    c.n_grid = {100};
    c.m = 50;
    c.d_grid = {3, 5, 7};
    c.trials = 20000;
  } else if (experiment == "random-sum") {
    c.d = 3;
    c.r = 2;
    c.n_grid = {50};
    c.p_grid = {0.1, 0.01, 0.001};
    c.trials = 100000;
    c.kappa_trials = 20000;
    c.summands = {"coin", "two-point", "occupancy"};
  } else if (experiment == "clt") {
    c.clt_n = {25, 100, 400};
    c.eps_grid = {0.01, 0.04, 0.16};
    c.mvn_base = {{0.0, 0.0}, {0.0, 0.0}};
    c.trials = 100000;
    set_threshold(c, "mvn_slope_target", 0.5, "square-root dependence on the covariance gap");
    set_threshold(c, "mvn_slope_tolerance", 0.15, "allowed deviation of the fitted slope");
  } else if (experiment == "estimate-kappa") {
    c.d = 3;
    c.r = 5;
    c.n_grid = {50, 100, 200};
    c.trials = 100000;
  } else if (experiment == "estimate-sigma") {
    c.d = 3;
    c.r = 3;
    c.n_grid = {200};
    c.trials = 100000;
  } else if (experiment == "survival") {
    c.law.name = "geometric";
    c.n_grid = {10, 100, 500};
    c.trials = 1000000;
  } else {
    throw config_error("unknown experiment '" + experiment + "'");
  }
  return c;
}

ExperimentConfig parse_config(const json& j, const std::string& experiment) {
  if (!j.is_object()) throw config_error("config must be a JSON object");
  std::string name = experiment;
  if (j.contains("experiment")) {
    const auto in_file = j.at("experiment").get<std::string>();
    if (name.empty()) name = in_file;
  }
  if (name.empty()) throw config_error("no experiment given");
  ExperimentConfig c = default_config(name);
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "experiment") continue;
      if (key == "law") c.law = parse_law(v);
      else if (key == "d") c.d = v.get<int>();
      else if (key == "n_grid") c.n_grid = v.get<std::vector<int>>();
      else if (key == "r") c.r = v.get<int>();
      else if (key == "m") c.m = v.get<int>();
      else if (key == "trials") c.trials = v.get<std::size_t>();
      else if (key == "kappa_trials") c.kappa_trials = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "threads") c.threads = v.get<unsigned>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "sampler") c.sampler = v.get<std::string>();
      else if (key == "ot_cap") c.ot_cap = v.get<std::size_t>();
      else if (key == "replicates") c.replicates = v.get<int>();
      else if (key == "bootstrap") c.bootstrap = v.get<int>();
      else if (key == "matching_n") c.matching_n = v.get<std::size_t>();
      else if (key == "c_r") c.c_r = v.get<double>();
      else if (key == "c_mvn") c.c_mvn = v.get<double>();
      else if (key == "p_grid") c.p_grid = v.get<std::vector<double>>();
      else if (key == "clt_n") c.clt_n = v.get<std::vector<int>>();
      else if (key == "eps_grid") c.eps_grid = v.get<std::vector<double>>();
      else if (key == "mvn_base") c.mvn_base = parse_matrix(v);
      else if (key == "d_grid") c.d_grid = v.get<std::vector<int>>();
      else if (key == "summands") c.summands = v.get<std::vector<std::string>>();
      else if (key == "gap_convention") c.gap_convention = v.get<std::string>();
      else if (key == "exploratory") c.exploratory = v.get<bool>();
      else if (key == "thresholds") {
        for (const auto& [tk, tv] : v.items()) {
          auto& t = c.thresholds[tk];
          if (tv.is_number()) {
            t.value = tv.get<double>();
          } else {
            t.value = tv.at("value").get<double>();
            if (tv.contains("note")) t.note = tv.at("note").get<std::string>();
          }
        }
      } else {
        throw config_error("unknown config field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed config value: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& experiment) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j, experiment);
}

void validate(const ExperimentConfig& c) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    throw config_error("unknown experiment '" + c.experiment + "'");
  }
  if (c.trials < 100) throw config_error("trials must be at least 100");
  if (c.kappa_trials != 0 && c.kappa_trials < 100) throw config_error("kappa_trials must be at least 100");
  if (c.experiment != "clt") {
    if (c.n_grid.empty()) throw config_error("n_grid is empty");
    if (!strictly_increasing(c.n_grid)) throw config_error("n_grid must be strictly increasing");
    if (c.n_grid.front() < 1 || c.n_grid.back() > 32767) throw config_error("n_grid entries must lie in 1..32767");
  }
  if (c.replicates < 2) throw config_error("replicates must be at least 2");
  if (c.bootstrap < 2) throw config_error("bootstrap must be at least 2");
  if (c.matching_n < 2 || c.matching_n > c.ot_cap) {
    throw config_error("matching_n must lie in 2..ot_cap (" + std::to_string(c.ot_cap) + ")");
  }
  if (c.c_r < 0 || c.c_mvn < 0) throw config_error("bound constants must be non-negative");

  OffspringLaw law = [&] {
    try {
      return c.law.build();
    } catch (const Error& e) {
      throw config_error(std::string("invalid law: ") + e.what());
    }
  }();
  if (law.immortal()) throw config_error("law has pmf(0) = 0; the process never dies and conditioning is void");

  const SamplerKind sampler = parse_sampler(c.sampler);
  if (sampler == SamplerKind::unconditioned) {
    throw config_error("sampler 'unconditioned' cannot produce trees conditioned on survival");
  }

  if (is_occupancy_suite(c.experiment) || (c.experiment == "random-sum" &&
                                           std::count(c.summands.begin(), c.summands.end(), "occupancy"))) {
    if (c.d < 3) throw config_error("d = " + std::to_string(c.d) + ": occupancy suites need d >= 3 (transient walk)");
    if (c.d > 64) throw config_error("d must be at most 64");
  }
  const int min_r = c.experiment == "theorem1" ? 0 : 1;
  if (c.r < min_r) throw config_error("r must be at least " + std::to_string(min_r));
  if (c.experiment == "theorem3" && c.d < 7 && !c.exploratory) {
    throw config_error("d = " + std::to_string(c.d) +
                       ": the Laplace limit is established for d >= 7; set exploratory to run lower dimensions");
  }
  if (c.experiment == "theorem3" && c.r > 1 && c.trials < c.matching_n * static_cast<std::size_t>(c.replicates)) {
    throw config_error("theorem3 with r > 1 needs trials >= replicates * matching_n");
  }
  if (c.experiment == "decomposition") {
    if (c.m < 1 || c.m >= c.n_grid.front()) throw config_error("m must satisfy 0 < m < n for every n in n_grid");
    if (c.d_grid.empty()) throw config_error("d_grid is empty");
    if (!strictly_increasing(c.d_grid)) throw config_error("d_grid must be strictly increasing");
    if (c.d_grid.front() < 3) throw config_error("d_grid entries must be >= 3 (transient walk)");
    if (c.gap_convention != "in_tree" && c.gap_convention != "independent_copy") {
      throw config_error("gap_convention must be in_tree or independent_copy");
    }
  }
  if (c.experiment == "random-sum") {
    if (c.p_grid.empty()) throw config_error("p_grid is empty");
    for (double p : c.p_grid) {
      if (!(p > 0 && p < 1)) throw config_error("p_grid entries must lie in (0, 1)");
    }
    if (c.summands.empty()) throw config_error("summands is empty");
    for (const auto& s : c.summands) {
      if (s != "coin" && s != "two-point" && s != "occupancy") {
        throw config_error("unknown summand '" + s + "' (coin, two-point, occupancy)");
      }
    }
  }
  if (c.experiment == "clt") {
    if (c.clt_n.empty() || !strictly_increasing(c.clt_n) || c.clt_n.front() < 1) {
      throw config_error("clt_n must be a strictly increasing list of positive sizes");
    }
    if (c.eps_grid.size() < 2 || !strictly_increasing(c.eps_grid) || c.eps_grid.front() <= 0) {
      throw config_error("eps_grid needs at least two increasing positive values");
    }
    if (c.mvn_base.empty()) throw config_error("mvn_base is empty");
  }
  static const std::set<std::string> known_thresholds{
      "se_margin",          "max_distance",      "slope_low",        "slope_high",       "variance_tolerance",
      "swap_se_margin",     "fourth_ratio_low",  "fourth_ratio_high", "mvn_slope_target", "mvn_slope_tolerance"};
  for (const auto& [k, t] : c.thresholds) {
    if (!known_thresholds.count(k)) throw config_error("unknown threshold '" + k + "'");
    if (!std::isfinite(t.value)) throw config_error("threshold '" + k + "' is not finite");
  }
}

nlohmann::json law_to_json(const LawSpec& law) {
  json j;
  j["name"] = law.name;
  if (law.name == "geometric") {
    j["p"] = law.p;
    j["cutoff"] = law.cutoff;
  } else if (law.name == "poisson") {
    j["lambda"] = law.lambda;
  } else if (law.name == "custom") {
    json pmf = json::object();
    for (const auto& [k, v] : law.pmf) pmf[std::to_string(k)] = v;
    j["pmf"] = pmf;
  }
  return j;
}

nlohmann::json snapshot(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["law"] = law_to_json(c.law);
  j["d"] = c.d;
  j["n_grid"] = c.n_grid;
  j["r"] = c.r;
  j["m"] = c.m;
  j["trials"] = c.trials;
  j["kappa_trials"] = c.estimate_trials();
  j["seed"] = c.seed;
  j["sampler"] = c.sampler;
  j["ot_cap"] = c.ot_cap;
  j["replicates"] = c.replicates;
  j["bootstrap"] = c.bootstrap;
  j["matching_n"] = c.matching_n;
  j["c_r"] = c.c_r;
  j["c_mvn"] = c.c_mvn;
  j["p_grid"] = c.p_grid;
  j["clt_n"] = c.clt_n;
  j["eps_grid"] = c.eps_grid;
  j["mvn_base"] = c.mvn_base;
  j["d_grid"] = c.d_grid;
  j["summands"] = c.summands;
  j["gap_convention"] = c.gap_convention;
  j["exploratory"] = c.exploratory;
  json t = json::object();
  for (const auto& [k, v] : c.thresholds) t[k] = {{"value", v.value}, {"note", v.note}};
  j["thresholds"] = t;
  return j;
}

}  // namespace brw
