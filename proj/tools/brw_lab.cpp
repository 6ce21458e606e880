#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "brw/config.hpp"
#include "brw/error.hpp"
#include "brw/experiments.hpp"

namespace {

using nlohmann::json;

struct Flags {
  std::string config_path;
  std::string output_dir;
  unsigned threads = 1;
  bool print_config = false;
  bool quiet = false;

  std::string law;
  std::string pmf;
  double law_p = 0;
  double lambda = 0;
  unsigned cutoff = 0;
  int d = 0;
  std::vector<int> n_grid;
  int r = 0;
  int m = 0;
  std::size_t trials = 0;
  std::size_t kappa_trials = 0;
  std::uint64_t seed = 0;
  std::string sampler;
  std::size_t ot_cap = 0;
  int replicates = 0;
  int bootstrap = 0;
  std::size_t matching_n = 0;
  double c_r = 0;
  double c_mvn = 0;
  std::vector<double> p_grid;
  std::vector<int> clt_n;
  std::vector<double> eps_grid;
  std::string mvn_base;
  std::vector<int> d_grid;
  std::vector<std::string> summands;
  std::string gap_convention;
  bool exploratory = false;
  std::vector<std::string> thresholds;
};

// "0:0.25,1:0.5,2:0.25"
json parse_pmf(const std::string& text) {
  json pmf = json::object();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw brw::Error(brw::ErrorKind::config, "pmf entry '" + item + "' lacks ':'");
    try {
      pmf[item.substr(0, colon)] = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw brw::Error(brw::ErrorKind::config, "pmf entry '" + item + "' has a bad probability");
    }
  }
  return pmf;
}

// "a,b;c,d"
json parse_rows(const std::string& text) {
  json rows = json::array();
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    std::vector<double> values;
    std::stringstream rs(row);
    std::string cell;
    while (std::getline(rs, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw brw::Error(brw::ErrorKind::config, "mvn-base entry '" + cell + "' is not a number");
      }
    }
    rows.push_back(values);
  }
  return rows;
}

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON config file; flags override its fields")->check(CLI::ExistingFile);
  sub->add_option("--output-dir", f.output_dir, "directory for JSONL and CSV outputs");
  sub->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  sub->add_flag("--print-config", f.print_config, "print the resolved config and exit");
  sub->add_flag("--quiet", f.quiet, "only print the final status line");

  sub->add_option("--law", f.law, "binary, geometric or poisson");
  sub->add_option("--pmf", f.pmf, "inline offspring pmf, e.g. 0:0.25,1:0.5,2:0.25");
  sub->add_option("--law-p", f.law_p, "success probability of the geometric law");
  sub->add_option("--lambda", f.lambda, "mean of the Poisson law");
  sub->add_option("--cutoff", f.cutoff, "truncation point of the geometric law (0 = automatic)");
  sub->add_option("--d", f.d, "lattice dimension");
  sub->add_option("--n-grid", f.n_grid, "horizons, comma separated")->delimiter(',');
  sub->add_option("--r", f.r, "spectrum truncation");
  sub->add_option("--m", f.m, "intermediate generation");
  sub->add_option("--trials", f.trials, "trials per grid point");
  sub->add_option("--kappa-trials", f.kappa_trials, "trees in the estimation batch");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--sampler", f.sampler, "pruned, spine or rejection");
  sub->add_option("--ot-cap", f.ot_cap, "largest sample size of the assignment solver");
  sub->add_option("--replicates", f.replicates, "matching replicates per grid point");
  sub->add_option("--bootstrap", f.bootstrap, "bootstrap resamples");
  sub->add_option("--matching-n", f.matching_n, "sample size per matching replicate");
  sub->add_option("--c-r", f.c_r, "constant of the random-sum bound (0 = default)");
  sub->add_option("--c-mvn", f.c_mvn, "constant of the normal comparison bound (0 = default)");
  sub->add_option("--p-grid", f.p_grid, "geometric parameters, comma separated")->delimiter(',');
  sub->add_option("--clt-n", f.clt_n, "CLT sample sizes, comma separated")->delimiter(',');
  sub->add_option("--eps-grid", f.eps_grid, "covariance shifts, comma separated")->delimiter(',');
  sub->add_option("--mvn-base", f.mvn_base, "base covariance, rows separated by ';'");
  sub->add_option("--d-grid", f.d_grid, "dimensions, comma separated")->delimiter(',');
  sub->add_option("--summands", f.summands, "coin, two-point, occupancy")->delimiter(',');
  sub->add_option("--gap-convention", f.gap_convention, "in_tree or independent_copy");
  sub->add_flag("--exploratory", f.exploratory, "allow dimensions below the hypothesis of the suite");
  sub->add_option("--threshold", f.thresholds, "override a threshold, key=value (repeatable)");
}

json overrides(const CLI::App* sub, const Flags& f, json base) {
  const auto set = [&](const char* flag) { return sub->get_option(flag)->count() > 0; };

  if (set("--law") || set("--pmf") || set("--law-p") || set("--lambda") || set("--cutoff")) {
    json law = json::object();
    if (base.contains("law")) law = base["law"].is_string() ? json{{"name", base["law"]}} : base["law"];
    if (set("--law")) {
      law = json{{"name", f.law}};
    }
    if (set("--pmf")) {
      law.erase("name");
      law["pmf"] = parse_pmf(f.pmf);
    }
    if (set("--law-p")) law["p"] = f.law_p;
    if (set("--lambda")) law["lambda"] = f.lambda;
    if (set("--cutoff")) law["cutoff"] = f.cutoff;
    base["law"] = law;
  }
  if (set("--d")) base["d"] = f.d;
  if (set("--n-grid")) base["n_grid"] = f.n_grid;
  if (set("--r")) base["r"] = f.r;
  if (set("--m")) base["m"] = f.m;
  if (set("--trials")) base["trials"] = f.trials;
  if (set("--kappa-trials")) base["kappa_trials"] = f.kappa_trials;
  if (set("--seed")) base["seed"] = f.seed;
  if (set("--sampler")) base["sampler"] = f.sampler;
  if (set("--ot-cap")) base["ot_cap"] = f.ot_cap;
  if (set("--replicates")) base["replicates"] = f.replicates;
  if (set("--bootstrap")) base["bootstrap"] = f.bootstrap;
  if (set("--matching-n")) base["matching_n"] = f.matching_n;
  if (set("--c-r")) base["c_r"] = f.c_r;
  if (set("--c-mvn")) base["c_mvn"] = f.c_mvn;
  if (set("--p-grid")) base["p_grid"] = f.p_grid;
  if (set("--clt-n")) base["clt_n"] = f.clt_n;
  if (set("--eps-grid")) base["eps_grid"] = f.eps_grid;
  if (set("--mvn-base")) base["mvn_base"] = parse_rows(f.mvn_base);
  if (set("--d-grid")) base["d_grid"] = f.d_grid;
  if (set("--summands")) base["summands"] = f.summands;
  if (set("--gap-convention")) base["gap_convention"] = f.gap_convention;
  if (set("--exploratory")) base["exploratory"] = f.exploratory;
  if (set("--threads")) base["threads"] = f.threads;
  if (set("--output-dir")) base["output_dir"] = f.output_dir;
  for (const auto& t : f.thresholds) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw brw::Error(brw::ErrorKind::config, "threshold '" + t + "' is not key=value");
    try {
      base["thresholds"][t.substr(0, eq)] = std::stod(t.substr(eq + 1));
    } catch (const std::exception&) {
      throw brw::Error(brw::ErrorKind::config, "threshold '" + t + "' has a bad value");
    }
  }
  return base;
}

int run(const std::string& suite, const CLI::App* sub, const Flags& f) {
  json j = json::object();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw brw::Error(brw::ErrorKind::config, "cannot parse " + f.config_path + ": " + e.what());
    }
    if (j.contains("experiment") && j["experiment"] != suite) {
      throw brw::Error(brw::ErrorKind::config, "config file is for '" + j["experiment"].get<std::string>() +
                                                   "', not '" + suite + "'");
    }
  }
  j = overrides(sub, f, j);
  const brw::ExperimentConfig cfg = brw::parse_config(j, suite);
  brw::validate(cfg);
  if (f.print_config) {
    json out = brw::snapshot(cfg);
    out["threads"] = cfg.threads;
    out["output_dir"] = cfg.output_dir;
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  const brw::RunRecord rec = brw::run_experiment(cfg);
  brw::write_outputs(rec, cfg.output_dir);
  if (!f.quiet) {
    for (const auto& c : rec.checks) {
      std::printf("%-4s %s%s value=%.6g reference=%.6g margin=%.3g %s\n", c.passed ? "ok" : "FAIL",
                  c.name.c_str(), c.asserted ? "" : " (diagnostic)", c.value, c.reference, c.margin,
                  c.detail.c_str());
    }
    for (const auto& w : rec.warnings) std::printf("warning: %s\n", w.c_str());
  }
  std::printf("%s: %s in %.1f s, outputs in %s\n", suite.c_str(), rec.passed() ? "passed" : "FAILED",
              rec.wall_clock_seconds, cfg.output_dir.c_str());
  return rec.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical branching random walk simulation and verification lab"};
  app.require_subcommand(1);
  Flags flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : brw::suite_names()) {
    subs[name] = app.add_subcommand(name, "run the " + name + " suite");
    add_flags(subs[name], flags);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      return run(name, sub, flags);
    } catch (const brw::Error& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return e.kind() == brw::ErrorKind::retry_budget_exceeded ? 3 : 1;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  }
  return 1;
}
