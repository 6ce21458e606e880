#include "brw/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "brw/error.hpp"
#include "brw/estimators.hpp"
#include "brw/gw_tree.hpp"
#include "brw/lattice.hpp"
#include "brw/parallel.hpp"
#include "brw/reference_laws.hpp"
#include "brw/wasserstein.hpp"

namespace brw {

namespace {

using nlohmann::json;

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  const auto n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
    s.se = s.sd / std::sqrt(n);
  }
  return s;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::uint64_t label(const std::string& suite, const std::string& step, double x = 0.0) {
  return stream_label(suite + "/" + step + "/" + fmt(x));
}

RunRecord start_record(const ExperimentConfig& cfg) {
  RunRecord rec;
  rec.suite = cfg.experiment;
  rec.config = snapshot(cfg);
  rec.seed = cfg.seed;
  return rec;
}

/// Passes when `earlier` exceeds `later` by more than k combined SEs.
Check decrease_check(const std::string& name, double earlier, double se_earlier, double later, double se_later,
                     double k) {
  Check c;
  c.name = name;
  c.value = earlier - later;
  c.reference = 0.0;
  c.margin = k * std::hypot(se_earlier, se_later);
  c.passed = c.value > c.margin;
  c.detail = fmt(earlier) + " -> " + fmt(later);
  return c;
}

/// Passes when value <= reference + margin.
Check upper_check(const std::string& name, double value, double reference, double margin = 0.0) {
  Check c;
  c.name = name;
  c.value = value;
  c.reference = reference;
  c.margin = margin;
  c.passed = value <= reference + margin;
  return c;
}

Check range_check(const std::string& name, double value, double low, double high, bool asserted = true) {
  Check c;
  c.name = name;
  c.asserted = asserted;
  c.value = value;
  c.reference = 0.5 * (low + high);
  c.margin = 0.5 * (high - low);
  c.passed = value >= low && value <= high;
  c.detail = "[" + fmt(low) + ", " + fmt(high) + "]";
  return c;
}

/// Sample-vs-sample distance with its bootstrap SE and the self-distance
/// baseline of the target at the same size.
struct Excess {
  DistanceReport distance;
  double baseline_sd = 0.0;
  double excess = 0.0;
  double excess_se = 0.0;
};

json excess_json(double x, const Excess& e) {
  json j;
  j["x"] = x;
  j["distance"] = e.distance;
  j["baseline_sd"] = e.baseline_sd;
  j["excess"] = e.excess;
  j["excess_se"] = e.excess_se;
  return j;
}

void excess_rows(RunRecord& rec, const std::string& grid, double x, const std::string& prefix, const Excess& e) {
  rec.rows.push_back({grid, x, prefix + "w1", e.distance.value, e.distance.se});
  rec.rows.push_back({grid, x, prefix + "baseline", *e.distance.baseline, e.baseline_sd});
  rec.rows.push_back({grid, x, prefix + "excess", e.excess, e.excess_se});
}

std::vector<double> draw_target_1d(const std::function<double(Stream&)>& target, std::size_t n, std::uint64_t seed,
                                   std::uint64_t lab) {
  Stream s(seed, lab, 0);
  std::vector<double> y(n);
  for (auto& v : y) v = target(s);
  return y;
}

Excess excess_1d(const std::vector<double>& sample, const std::vector<double>& target_sample,
                 const std::function<double(Stream&)>& target, const ExperimentConfig& cfg, std::uint64_t lab) {
  Excess e;
  e.distance = w1_sorted(sample, target_sample);
  Stream boot_rng(cfg.seed, lab, 1);
  const Baseline boot = bootstrap_resample(
      sample, [&](std::span<const double> re) { return w1_sorted(re, target_sample).value; }, cfg.bootstrap,
      boot_rng, cfg.threads);
  e.distance.se = boot.sd;
  Stream base_rng(cfg.seed, lab, 2);
  const Baseline base = bootstrap_baseline_1d(target, sample.size(), cfg.bootstrap, base_rng, cfg.threads);
  e.distance.baseline = base.mean;
  e.baseline_sd = base.sd;
  e.excess = e.distance.value - base.mean;
  e.excess_se = std::hypot(boot.sd, base.sd / std::sqrt(static_cast<double>(base.resamples)));
  return e;
}

/// Mean over replicates of the matching distance between block k of the
/// simulated sample and a fresh target sample, minus the target's baseline.
Excess excess_mv(const std::function<Eigen::MatrixXd(std::size_t)>& block,
                 const std::function<Eigen::VectorXd(Stream&)>& target, int r, const ExperimentConfig& cfg,
                 std::uint64_t lab) {
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  const std::size_t n = cfg.matching_n;
  std::vector<double> dist(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t k) {
    Stream s(cfg.seed, lab, k);
    Eigen::MatrixXd y(n, r);
    for (std::size_t i = 0; i < n; ++i) y.row(i) = target(s).transpose();
    dist[k] = w1_matching(block(k), y, cfg.ot_cap).value;
  });
  const Summary d = summarize(dist);
  Stream base_rng(cfg.seed, lab, reps);
  const Baseline base = bootstrap_baseline_mv(target, r, n, cfg.replicates, base_rng, cfg.threads, cfg.ot_cap);
  Excess e;
  e.distance.value = d.mean;
  e.distance.se = d.se;
  e.distance.n = n;
  e.distance.baseline = base.mean;
  e.baseline_sd = base.sd;
  e.excess = d.mean - base.mean;
  e.excess_se = std::hypot(d.se, base.sd / std::sqrt(static_cast<double>(base.resamples)));
  return e;
}

std::vector<double> conditioned_sizes(const OffspringLaw& law, int n, std::size_t trials, SamplerKind sampler,
                                      std::uint64_t seed, std::uint64_t lab, unsigned threads) {
  std::optional<SpineSampler> spine;
  if (sampler == SamplerKind::pruned_spine || sampler == SamplerKind::spine) {
    SpineOptions opt;
    opt.prune = sampler == SamplerKind::pruned_spine;
    spine.emplace(law, n, opt);
  }
  std::vector<double> z(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    Stream rng(seed, lab, t);
    const ConditionedForest f = spine ? spine->sample(rng) : sample_conditioned_rejection(law, n, rng);
    z[t] = static_cast<double>(f.z_n());
  });
  return z;
}

json kappa_json(const KappaEstimate& k) {
  return json{{"n", k.n_used},           {"trials", k.trials},   {"survival", k.survival_used},
              {"kappa", k.kappa},        {"se", k.se},           {"weighted_sum", k.weighted_sum},
              {"weighted_sum_se", k.weighted_sum_se}};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << "k" << j + 1;
  out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
  return out.str();
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

OccupancyBatch resample_batch(const OccupancyBatch& b, Stream& s) {
  OccupancyBatch out = b;
  const std::size_t T = b.trials();
  const auto r = static_cast<std::size_t>(b.r);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t src = s.below(T);
    out.z[t] = b.z[src];
    out.overflow_mass[t] = b.overflow_mass[src];
    for (std::size_t j = 0; j < r; ++j) out.m[t * r + j] = b.m[src * r + j];
  }
  return out;
}

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

}  // namespace

bool RunRecord::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return !c.asserted || c.passed; });
}

const Check* RunRecord::find_check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

json RunRecord::to_json(bool with_wall_clock) const {
  json j;
  j["suite"] = suite;
  j["artifact_version"] = kArtifactVersion;
  j["seed"] = seed;
  j["config"] = config;
  j["estimates"] = estimates;
  j["reports"] = reports;
  json cs = json::array();
  for (const auto& c : checks) {
    cs.push_back({{"name", c.name},
                  {"asserted", c.asserted},
                  {"passed", c.passed},
                  {"value", c.value},
                  {"reference", c.reference},
                  {"margin", c.margin},
                  {"detail", c.detail}});
  }
  j["checks"] = cs;
  j["warnings"] = warnings;
  j["passed"] = passed();
  if (with_wall_clock) j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return std::nan("");
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::nan("");
}

RunRecord run_yaglom(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const OffspringLaw law = cfg.law.build();
  const SamplerKind sampler = parse_sampler(cfg.sampler);
  const double rate = 2.0 / law.sigma2();
  const double k = cfg.threshold("se_margin");
  rec.estimates["exp_rate"] = rate;
  rec.estimates["exp_mean"] = 1.0 / rate;

  std::vector<double> xs, values, ses;
  for (int n : cfg.n_grid) {
    std::vector<double> z = conditioned_sizes(law, n, cfg.trials, sampler, cfg.seed, label("yaglom", "trees", n),
                                              cfg.threads);
    for (auto& v : z) v /= n;
    DistanceReport d = w1_vs_exp(z, rate);
    Stream boot_rng(cfg.seed, label("yaglom", "bootstrap", n), 0);
    d.se = bootstrap_resample(
               z, [&](std::span<const double> re) { return w1_vs_exp(re, rate).value; }, cfg.bootstrap, boot_rng,
               cfg.threads)
               .sd;

    std::vector<double> base(static_cast<std::size_t>(cfg.bootstrap));
    const std::uint64_t base_label = label("yaglom", "baseline", n);
    parallel_for(base.size(), cfg.threads, [&](std::size_t b) {
      Stream s(cfg.seed, base_label, b);
      std::vector<double> e(cfg.trials);
      for (auto& v : e) v = sample_exp(rate, s);
      base[b] = w1_vs_exp(e, rate).value;
    });
    const Summary bs = summarize(base);
    d.baseline = bs.mean;

    const Summary mz = summarize(z);
    const double exact_mean = 1.0 / (n * law.survival_exact(n));
    Check mean_check = upper_check("conditioned_mean_n=" + std::to_string(n), std::abs(mz.mean - exact_mean), 0.0,
                                   k * mz.se);
    mean_check.detail = "mean Z_n/n " + fmt(mz.mean) + " vs exact " + fmt(exact_mean);
    rec.checks.push_back(mean_check);

    json rep = {{"x", n}, {"distance", d}, {"baseline_sd", bs.sd}, {"mean", mz.mean}, {"mean_se", mz.se},
                {"exact_mean", exact_mean}};
    rec.reports.push_back(rep);
    rec.rows.push_back({"n", double(n), "w1", d.value, d.se});
    rec.rows.push_back({"n", double(n), "baseline", bs.mean, bs.sd});
    rec.rows.push_back({"n", double(n), "mean", mz.mean, mz.se});
    xs.push_back(n);
    values.push_back(d.value);
    ses.push_back(d.se);
  }

  rec.checks.push_back(upper_check("distance_at_largest_n", values.back(), cfg.threshold("max_distance")));
  rec.checks.back().passed = values.back() < cfg.threshold("max_distance");
  if (values.size() > 1) {
    rec.checks.push_back(decrease_check("decrease_first_to_last", values.front(), ses.front(), values.back(),
                                        ses.back(), k));
  }
  const double slope = log_log_slope(xs, values);
  rec.estimates["log_log_slope"] = slope;
  rec.checks.push_back(
      range_check("log_log_slope", slope, cfg.threshold("slope_low"), cfg.threshold("slope_high"), false));
  return rec;
}

RunRecord run_theorem1(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const OffspringLaw law = cfg.law.build();
  const SamplerKind sampler = parse_sampler(cfg.sampler);
  const double rate = 2.0 / law.sigma2();
  const int r = cfg.r;
  const int rb = std::max(r, 1);
  const double k = cfg.threshold("se_margin");

  std::vector<double> kappa;
  if (r > 0) {
    const OccupancyBatch est = simulate_occupancy(law, cfg.d, cfg.n_grid.back(), r, cfg.estimate_trials(), cfg.seed,
                                                  label("theorem1", "estimate"), cfg.threads, sampler);
    const KappaEstimate kr = estimate_mu_ratio(est);
    kappa = kr.kappa;
    rec.estimates["kappa"] = kappa_json(kr);
    rec.estimates["kappa_survival_weighted"] = kappa_json(estimate_mu(est));
  }
  rec.estimates["exp_rate"] = rate;

  const auto target = [&](Stream& s) {
    Eigen::VectorXd v(r + 1);
    const double e = sample_exp(rate, s);
    v(0) = e;
    for (int j = 0; j < r; ++j) v(j + 1) = kappa[j] * e;
    return v;
  };

  std::vector<double> xs, excess, ses;
  for (int n : cfg.n_grid) {
    const std::size_t trees = cfg.matching_n * static_cast<std::size_t>(cfg.replicates);
    const OccupancyBatch b =
        simulate_occupancy(law, cfg.d, n, rb, trees, cfg.seed, label("theorem1", "trees", n), cfg.threads, sampler);
    const auto block = [&](std::size_t rep) {
      Eigen::MatrixXd x(cfg.matching_n, r + 1);
      for (std::size_t i = 0; i < cfg.matching_n; ++i) {
        const std::size_t t = rep * cfg.matching_n + i;
        x(i, 0) = static_cast<double>(b.z[t]) / n;
        for (int j = 1; j <= r; ++j) x(i, j) = static_cast<double>(b.count(t, j)) / n;
      }
      return x;
    };
    const Excess e = excess_mv(block, target, r + 1, cfg, label("theorem1", "target", n));
    rec.reports.push_back(excess_json(n, e));
    excess_rows(rec, "n", n, "", e);
    xs.push_back(n);
    excess.push_back(e.excess);
    ses.push_back(e.excess_se);
  }
  if (excess.size() > 1) {
    rec.checks.push_back(
        decrease_check("excess_decrease_first_to_last", excess.front(), ses.front(), excess.back(), ses.back(), k));
  }
  const double slope = log_log_slope(xs, excess);
  rec.estimates["log_log_slope"] = slope;
  rec.estimates["reference_exponent"] = -(cfg.d - 2.0) / (2.0 * (cfg.d + 1.0));
  return rec;
}

RunRecord run_theorem3(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const OffspringLaw law = cfg.law.build();
  const SamplerKind sampler = parse_sampler(cfg.sampler);
  const int r = cfg.r;
  const double k = cfg.threshold("se_margin");
  const double sigma2 = law.sigma2();
  rec.estimates["out_of_hypothesis"] = cfg.d < 7;

  const OccupancyBatch est = simulate_occupancy(law, cfg.d, cfg.n_grid.back(), r, cfg.estimate_trials(), cfg.seed,
                                                label("theorem3", "estimate"), cfg.threads, sampler);
  const KappaEstimate kappa = estimate_mu_ratio(est);
  const CovarianceEstimate cov = estimate_A(est, kappa);
  const CovMatrix st = sigma_tilde(cov, sigma2);
  rec.estimates["kappa"] = kappa_json(kappa);
  rec.estimates["kappa_survival_weighted"] = kappa_json(estimate_mu(est));
  rec.estimates["a_hat"] = matrix_json(cov.a_hat);
  rec.estimates["a_hat_se"] = matrix_json(cov.se);
  rec.estimates["sigma_tilde"] = matrix_json(st.entries);
  const Eigen::VectorXd ev = sorted_eigenvalues(st.entries);
  rec.estimates["sigma_tilde_eigenvalues"] = std::vector<double>(ev.data(), ev.data() + ev.size());
  const double top_se = 0.5 * sigma2 * cov.se.maxCoeff();
  if (ev(0) < k * top_se) {
    rec.warnings.push_back("DegenerateSigma: top eigenvalue " + fmt(ev(0)) + " is below " + fmt(k) + " SE");
  }

  for (int j = 1; j <= r; ++j) {
    const FourthMomentRatio f = fourth_moment_ratio(est, kappa, cov, sigma2, j);
    rec.estimates["fourth_moment_j" + std::to_string(j)] = {{"fourth", f.fourth},       {"fourth_se", f.fourth_se},
                                                            {"companion", f.companion}, {"companion_se", f.companion_se},
                                                            {"ratio", f.ratio},         {"ratio_se", f.ratio_se}};
    rec.rows.push_back({"n", double(cfg.n_grid.back()), "fourth_moment_ratio_j" + std::to_string(j), f.ratio,
                        f.ratio_se});
    Check c = range_check("fourth_moment_ratio_j" + std::to_string(j), f.ratio, cfg.threshold("fourth_ratio_low"),
                          cfg.threshold("fourth_ratio_high"));
    c.detail += " se " + fmt(f.ratio_se);
    rec.checks.push_back(c);
  }

  const auto target = [&](Stream& s) { return sample_sl(st, s); };
  const auto target_1d = [&](Stream& s) { return sample_sl(st, s)(0); };

  // Distance of the centred per-tree vectors for the given centring constants.
  const auto distance = [&](const OccupancyBatch& b, const std::vector<double>& centre, int n,
                            const std::vector<double>* target_sample) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    const std::uint64_t lab = label("theorem3", "target", n);
    if (r == 1) {
      std::vector<double> v(b.trials());
      for (std::size_t t = 0; t < b.trials(); ++t) {
        v[t] = (static_cast<double>(b.count(t, 1)) - centre[0] * static_cast<double>(b.z[t])) * scale;
      }
      return excess_1d(v, *target_sample, target_1d, cfg, lab);
    }
    const auto block = [&](std::size_t rep) {
      Eigen::MatrixXd x(cfg.matching_n, r);
      for (std::size_t i = 0; i < cfg.matching_n; ++i) {
        const std::size_t t = rep * cfg.matching_n + i;
        for (int j = 1; j <= r; ++j) {
          x(i, j - 1) = (static_cast<double>(b.count(t, j)) - centre[j - 1] * static_cast<double>(b.z[t])) * scale;
        }
      }
      return x;
    };
    return excess_mv(block, target, r, cfg, lab);
  };

  std::vector<double> xs, excess, ses;
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    const int n = cfg.n_grid[i];
    const OccupancyBatch b =
        simulate_occupancy(law, cfg.d, n, r, cfg.trials, cfg.seed, label("theorem3", "trees", n), cfg.threads, sampler);
    std::vector<double> y;
    if (r == 1) y = draw_target_1d(target_1d, b.trials(), cfg.seed, label("theorem3", "target-sample", n));
    const Excess e = distance(b, kappa.kappa, n, &y);
    json rep = excess_json(n, e);

    Eigen::VectorXd var = Eigen::VectorXd::Zero(r);
    for (int j = 1; j <= r; ++j) {
      std::vector<double> v(b.trials());
      for (std::size_t t = 0; t < b.trials(); ++t) {
        v[t] = (static_cast<double>(b.count(t, j)) - kappa.kappa[j - 1] * static_cast<double>(b.z[t])) /
               std::sqrt(static_cast<double>(n));
      }
      const Summary s = summarize(v);
      var(j - 1) = s.sd * s.sd;
    }
    rep["per_tree_variance"] = std::vector<double>(var.data(), var.data() + r);
    rec.rows.push_back({"n", double(n), "per_tree_variance_j1", var(0), 0.0});

    if (i + 1 == cfg.n_grid.size()) {
      for (int j = 1; j <= r; ++j) {
        const double target_var = st.entries(j - 1, j - 1);
        Check c = upper_check("variance_match_j" + std::to_string(j), std::abs(var(j - 1) / target_var - 1.0),
                              cfg.threshold("variance_tolerance"));
        c.detail = "variance " + fmt(var(j - 1)) + " vs target " + fmt(target_var);
        rec.checks.push_back(c);
      }
      const KappaEstimate mu_n = estimate_mu_ratio(b);
      const Excess swapped = distance(b, mu_n.kappa, n, &y);
      rep["swapped"] = excess_json(n, swapped);
      rep["mu_n"] = kappa_json(mu_n);
      Check c = upper_check("swap_kappa_for_mu_n", std::abs(swapped.distance.value - e.distance.value), 0.0,
                            cfg.threshold("swap_se_margin") * e.distance.se);
      rec.checks.push_back(c);
    }
    rec.reports.push_back(rep);
    excess_rows(rec, "n", n, "", e);
    xs.push_back(n);
    excess.push_back(e.excess);
    ses.push_back(e.excess_se);
  }
  for (std::size_t i = 1; i < excess.size(); ++i) {
    rec.checks.push_back(decrease_check("excess_decrease_n=" + std::to_string(cfg.n_grid[i - 1]) + "_to_" +
                                            std::to_string(cfg.n_grid[i]),
                                        excess[i - 1], ses[i - 1], excess[i], ses[i], k));
  }
  rec.estimates["log_log_slope"] = log_log_slope(xs, excess);
  rec.estimates["reference_exponent"] = -(2.0 * cfg.d - 9.0) / (6.0 * (2.0 * cfg.d + 1.0));
  return rec;
}

RunRecord run_decomposition_gap(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const OffspringLaw law = cfg.law.build();
  const SamplerKind sampler = parse_sampler(cfg.sampler);
  const GapConvention conv =
      cfg.gap_convention == "independent_copy" ? GapConvention::independent_copy : GapConvention::in_tree;
  const int r = cfg.r;
  const int m = cfg.m;
  const double k = cfg.threshold("se_margin");

  for (int n : cfg.n_grid) {
    std::vector<double> mean_y, se_y, mean_gap, se_gap;
    std::optional<SpineSampler> spine;
    if (sampler != SamplerKind::rejection) {
      SpineOptions opt;
      opt.prune = sampler == SamplerKind::pruned_spine;
      spine.emplace(law, n, opt);
    }
    for (int d : cfg.d_grid) {
      const LatticeConfig lattice(d);
      const std::size_t T = cfg.trials;
      std::vector<double> y(T), ancestors(T);
      std::vector<std::vector<double>> gap(static_cast<std::size_t>(r), std::vector<double>(T));
      std::vector<char> violation(T, 0);
      const std::uint64_t lab = label("decomposition", "trees/d=" + std::to_string(d), n);
      parallel_for(T, cfg.threads, [&](std::size_t t) {
        Stream rng(cfg.seed, lab, t);
        ConditionedForest f = spine ? spine->sample(rng) : sample_conditioned_rejection(law, n, rng);
        label_ancestors(f, m);
        const Cloud cloud = embed_horizon(f, lattice, rng);
        const std::int64_t shared = shared_site_count(f, cloud);
        const BlockCounts bc = block_counts(f, cloud, r);
        y[t] = static_cast<double>(shared);
        ancestors[t] = static_cast<double>(bc.ancestors);
        if (bc.ancestors == 1 && shared != 0) violation[t] = 1;
        std::vector<std::int64_t> copy(static_cast<std::size_t>(r), 0);
        if (conv == GapConvention::independent_copy) {
          const ConditionedForest c = simulate_tree(law, n - m, rng);
          if (c.z_n() > 0) {
            const OccupancySpectrum sp = occupancy_spectrum(embed_horizon(c, lattice, rng), r);
            for (int j = 1; j <= r; ++j) copy[j - 1] = sp.count(j);
          }
        }
        for (int j = 1; j <= r; ++j) {
          std::int64_t sum = bc.block_sum[j - 1];
          if (conv == GapConvention::independent_copy) sum += copy[j - 1] - bc.spine_term[j - 1];
          gap[j - 1][t] = static_cast<double>(std::abs(bc.total[j - 1] - sum));
        }
      });
      const Summary sy = summarize(y);
      const Summary sa = summarize(ancestors);
      json rep = {{"n", n},           {"m", m},         {"d", d},
                  {"mean_Y", sy.mean}, {"mean_Y_se", sy.se}, {"mean_ancestors", sa.mean},
                  {"trials", T}};
      json gaps = json::array();
      for (int j = 1; j <= r; ++j) {
        const Summary sg = summarize(gap[j - 1]);
        gaps.push_back({{"j", j}, {"mean_gap", sg.mean}, {"mean_gap_se", sg.se}, {"gap_over_n", sg.mean / n}});
        rec.rows.push_back({"d", double(d), "gap_over_n_j" + std::to_string(j) + "_n=" + std::to_string(n),
                            sg.mean / n, sg.se / n});
        if (j == 1) {
          mean_gap.push_back(sg.mean / n);
          se_gap.push_back(sg.se / n);
        }
      }
      rep["gaps"] = gaps;
      rec.reports.push_back(rep);
      rec.rows.push_back({"d", double(d), "mean_Y_n=" + std::to_string(n), sy.mean, sy.se});
      mean_y.push_back(sy.mean);
      se_y.push_back(sy.se);

      Check c = upper_check("single_ancestor_no_sharing_n=" + std::to_string(n) + "_d=" + std::to_string(d),
                            static_cast<double>(std::count(violation.begin(), violation.end(), 1)), 0.0);
      c.detail = "trees with one generation-m ancestor and Y > 0";
      rec.checks.push_back(c);
    }
    if (mean_y.size() > 1) {
      const std::string tag = "_n=" + std::to_string(n) + "_d=" + std::to_string(cfg.d_grid.front()) + "_to_" +
                              std::to_string(cfg.d_grid.back());
      rec.checks.push_back(decrease_check("mean_Y_decrease" + tag, mean_y.front(), se_y.front(), mean_y.back(),
                                          se_y.back(), k));
      rec.checks.push_back(decrease_check("gap_over_n_decrease" + tag, mean_gap.front(), se_gap.front(),
                                          mean_gap.back(), se_gap.back(), k));
    }
  }
  return rec;
}

RunRecord run_random_sum_suite(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const double k = cfg.threshold("se_margin");

  struct Summand {
    std::string name;
    int r = 1;
    SummandSampler draw;
    Eigen::MatrixXd sigma;
    double third_moment = 0.0;
  };
  std::vector<Summand> menu;
  Eigen::MatrixXd stored;
  for (const auto& name : cfg.summands) {
    Summand s;
    s.name = name;
    if (name == "coin") {
      s.r = 1;
      s.draw = [](Stream& rng) { return Eigen::VectorXd::Constant(1, (rng() & 1) ? 1.0 : -1.0); };
      s.sigma = Eigen::MatrixXd::Identity(1, 1);
      s.third_moment = 1.0;
    } else if (name == "two-point") {
      Eigen::VectorXd v(2);
      v << 1.0, -0.5;
      s.r = 2;
      s.draw = [v](Stream& rng) -> Eigen::VectorXd { return (rng() & 1) ? v : Eigen::VectorXd(-v); };
      s.sigma = v * v.transpose();
      s.third_moment = std::pow(v.lpNorm<1>(), 3);
    } else {
      const OffspringLaw law = cfg.law.build();
      const int n = cfg.n_grid.front();
      const OccupancyBatch b = simulate_occupancy(law, cfg.d, n, cfg.r, cfg.estimate_trials(), cfg.seed,
                                                  label("random-sum", "occupancy"), cfg.threads,
                                                  parse_sampler(cfg.sampler));
      const KappaEstimate kr = estimate_mu_ratio(b);
      stored.resize(static_cast<Eigen::Index>(b.trials()), cfg.r);
      for (std::size_t t = 0; t < b.trials(); ++t) {
        for (int j = 1; j <= cfg.r; ++j) {
          stored(t, j - 1) = static_cast<double>(b.count(t, j)) - kr.kappa[j - 1] * static_cast<double>(b.z[t]);
        }
      }
      stored.rowwise() -= stored.colwise().mean();
      s.r = cfg.r;
      s.sigma = stored.transpose() * stored / static_cast<double>(stored.rows());
      double m3 = 0.0;
      for (Eigen::Index t = 0; t < stored.rows(); ++t) m3 += std::pow(stored.row(t).lpNorm<1>(), 3);
      s.third_moment = m3 / static_cast<double>(stored.rows());
      const Eigen::MatrixXd* rows = &stored;
      s.draw = [rows](Stream& rng) -> Eigen::VectorXd {
        return rows->row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(rows->rows())))).transpose();
      };
      rec.estimates["occupancy_summand"] = {{"n", n}, {"d", cfg.d}, {"trials", b.trials()},
                                            {"kappa", kr.kappa}, {"sigma", matrix_json(s.sigma)},
                                            {"third_moment_l1", s.third_moment}};
    }
    menu.push_back(std::move(s));
  }

  // Distance of the geometric sum law to SL_r(sigma).
  const auto measure = [&](const Summand& s, const GeometricSumSpec& spec, const std::string& tag, double p) {
    const CovMatrix cov = sqrt_factor(s.sigma);
    const std::uint64_t lab = label("random-sum", tag, p);
    if (s.r == 1) {
      std::vector<double> xs(cfg.trials);
      parallel_for(xs.size(), cfg.threads, [&](std::size_t t) {
        Stream rng(cfg.seed, lab, t);
        xs[t] = sample_geometric_sum(spec, rng)(0);
      });
      const auto target = [&](Stream& rng) { return sample_sl(cov, rng)(0); };
      const auto y = draw_target_1d(target, xs.size(), cfg.seed, label("random-sum", tag + "/target-sample", p));
      return excess_1d(xs, y, target, cfg, label("random-sum", tag + "/target", p));
    }
    const std::size_t total = cfg.matching_n * static_cast<std::size_t>(cfg.replicates);
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(total), s.r);
    std::vector<Eigen::VectorXd> rows(total);
    parallel_for(total, cfg.threads, [&](std::size_t t) {
      Stream rng(cfg.seed, lab, t);
      rows[t] = sample_geometric_sum(spec, rng);
    });
    for (std::size_t t = 0; t < total; ++t) xs.row(static_cast<Eigen::Index>(t)) = rows[t].transpose();
    const auto block = [&](std::size_t rep) {
      return Eigen::MatrixXd(xs.middleRows(static_cast<Eigen::Index>(rep * cfg.matching_n),
                                           static_cast<Eigen::Index>(cfg.matching_n)));
    };
    return excess_mv(block, [&](Stream& rng) { return sample_sl(cov, rng); }, s.r, cfg,
                     label("random-sum", tag + "/target", p));
  };

  const double p_min = *std::min_element(cfg.p_grid.begin(), cfg.p_grid.end());
  for (const auto& s : menu) {
    const double c_r = cfg.c_r > 0 ? cfg.c_r : default_renyi_constant(s.r);
    std::vector<double> diag(static_cast<std::size_t>(s.r));
    for (int j = 0; j < s.r; ++j) diag[j] = s.sigma(j, j);
    double sqrt_diag = 0.0;
    for (double v : diag) sqrt_diag += std::sqrt(v);
    for (double p : cfg.p_grid) {
      const double mu = 1.0 / p;
      Stream check_rng(cfg.seed, label("random-sum", s.name + "/mean-check", p), 0);
      const GeometricSumSpec spec = make_geometric_sum_spec(s.draw, StoppingLaw::geometric(p), s.r, check_rng);
      const Excess e = measure(s, spec, s.name + "/geometric", p);
      const double bound = renyi_bound(mu, s.third_moment, diag, 0.0, c_r);
      json rep = excess_json(p, e);
      rep["summand"] = s.name;
      rep["stopping"] = "geometric";
      rep["bound"] = bound;
      rep["c_r"] = c_r;
      rec.reports.push_back(rep);
      excess_rows(rec, "p", p, s.name + "_", e);
      rec.rows.push_back({"p", p, s.name + "_bound", bound, 0.0});
      rec.checks.push_back(upper_check("below_bound_" + s.name + "_p=" + fmt(p), e.distance.value, bound));
      if (s.name == "coin" && p == p_min) {
        rec.checks.push_back(upper_check("coin_matches_laplace_p=" + fmt(p), e.excess, 0.0, k * e.excess_se));
      }

      if (s.name == "coin") {
        const auto steps = static_cast<std::uint64_t>(std::ceil(mu));
        const StoppingLaw det = StoppingLaw::deterministic(std::max<std::uint64_t>(steps, 2));
        const GeometricSumSpec dspec{s.draw, det, s.r};
        const Excess de = measure(s, dspec, "coin/deterministic", p);
        const double dw = det.w1_to_geometric();
        const double dbound = renyi_bound(det.mean(), s.third_moment, diag, dw, c_r);
        const double scale = 1.0 / std::sqrt(det.mean());
        const double moment_term = scale * c_r * std::cbrt(det.mean()) * std::cbrt(s.third_moment);
        const double dw_term = scale * sqrt_diag * dw;
        const double const_term = scale * 3.5;
        json drep = excess_json(p, de);
        drep["summand"] = s.name;
        drep["stopping"] = "deterministic";
        drep["bound"] = dbound;
        drep["dw_stopping"] = dw;
        drep["terms"] = {{"moment", moment_term}, {"stopping", dw_term}, {"constant", const_term}};
        rec.reports.push_back(drep);
        excess_rows(rec, "p", p, "coin_deterministic_", de);
        rec.checks.push_back(
            upper_check("deterministic_below_bound_p=" + fmt(p), de.distance.value, dbound));
        Check dom;
        dom.name = "deterministic_stopping_term_dominates_p=" + fmt(p);
        dom.value = dw_term;
        dom.reference = std::max(moment_term, const_term);
        dom.passed = dw_term > dom.reference;
        rec.checks.push_back(dom);
      }
    }
  }
  return rec;
}

RunRecord run_clt_suite(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const double k = cfg.threshold("se_margin");

  const CovMatrix unit = sqrt_factor(Eigen::MatrixXd::Identity(1, 1));
  const auto normal = [&](Stream& s) { return sample_mvn(unit, s)(0); };
  std::vector<double> values, ses;
  for (int n : cfg.clt_n) {
    std::vector<double> xs(cfg.trials);
    const std::uint64_t lab = label("clt", "sums", n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    parallel_for(xs.size(), cfg.threads, [&](std::size_t t) {
      Stream rng(cfg.seed, lab, t);
      std::int64_t sum = 0;
      for (int i = 0; i < n; ++i) sum += (rng() & 1) ? 1 : -1;
      xs[t] = static_cast<double>(sum) * scale;
    });
    const auto y = draw_target_1d(normal, xs.size(), cfg.seed, label("clt", "target-sample", n));
    Excess e = excess_1d(xs, y, normal, cfg, label("clt", "target", n));
    const double bound = clt_bound(1, n, 1.0);
    e.distance.bound = bound;
    rec.reports.push_back(excess_json(n, e));
    excess_rows(rec, "n", n, "", e);
    rec.rows.push_back({"n", double(n), "bound", bound, 0.0});
    rec.checks.push_back(upper_check("below_bound_n=" + std::to_string(n), e.distance.value, bound));
    values.push_back(e.distance.value);
    ses.push_back(e.distance.se);
  }
  for (std::size_t i = 1; i < values.size(); ++i) {
    rec.checks.push_back(decrease_check("decrease_n=" + std::to_string(cfg.clt_n[i - 1]) + "_to_" +
                                            std::to_string(cfg.clt_n[i]),
                                        values[i - 1], ses[i - 1], values[i], ses[i], k));
  }

  const Eigen::MatrixXd base = to_matrix(cfg.mvn_base);
  const int r = static_cast<int>(base.rows());
  const double c_mvn = cfg.c_mvn > 0 ? cfg.c_mvn : std::pow(static_cast<double>(r), 0.75);
  const CovMatrix a = sqrt_factor(base);
  rec.estimates["c_mvn"] = c_mvn;
  std::vector<double> excess;
  for (double eps : cfg.eps_grid) {
    const Eigen::MatrixXd shifted = base + eps * Eigen::MatrixXd::Identity(r, r);
    const CovMatrix b = sqrt_factor(shifted);
    const std::uint64_t xlab = label("clt", "mvn-sample", eps);
    const auto block = [&](std::size_t rep) {
      Stream s(cfg.seed, xlab, rep);
      Eigen::MatrixXd x(cfg.matching_n, r);
      for (std::size_t i = 0; i < cfg.matching_n; ++i) x.row(i) = sample_mvn(a, s).transpose();
      return x;
    };
    Excess e = excess_mv(block, [&](Stream& s) { return sample_mvn(b, s); }, r, cfg, label("clt", "mvn-target", eps));
    const double bound = mvn_compare_bound(base, shifted, c_mvn);
    e.distance.bound = bound;
    json rep = excess_json(eps, e);
    rep["statistic"] = "mvn_pair";
    rec.reports.push_back(rep);
    excess_rows(rec, "eps", eps, "mvn_", e);
    rec.rows.push_back({"eps", eps, "mvn_bound", bound, 0.0});
    rec.checks.push_back(upper_check("mvn_below_bound_eps=" + fmt(eps), e.excess, bound, k * e.excess_se));
    excess.push_back(e.excess);
  }
  const double slope = log_log_slope(cfg.eps_grid, excess);
  rec.estimates["mvn_log_log_slope"] = slope;
  const double target = cfg.threshold("mvn_slope_target");
  const double tol = cfg.threshold("mvn_slope_tolerance");
  rec.checks.push_back(range_check("mvn_log_log_slope", slope, target - tol, target + tol));
  return rec;
}

RunRecord run_estimate_kappa(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const OffspringLaw law = cfg.law.build();
  const SamplerKind sampler = parse_sampler(cfg.sampler);
  const double k = cfg.threshold("se_margin");
  std::ostringstream table;
  table << "n";
  for (const char* col : {"kappa", "se", "ratio", "ratio_se"}) {
    for (int j = 1; j <= cfg.r; ++j) table << "," << col << "_" << j;
  }
  table << "\n";
  for (int n : cfg.n_grid) {
    const OccupancyBatch b = simulate_occupancy(law, cfg.d, n, cfg.r, cfg.trials, cfg.seed,
                                                label("estimate-kappa", "trees", n), cfg.threads, sampler);
    const KappaEstimate mu = estimate_mu(b);
    const KappaEstimate ratio = estimate_mu_ratio(b);
    rec.reports.push_back({{"x", n}, {"survival_weighted", kappa_json(mu)}, {"ratio", kappa_json(ratio)}});
    table << n;
    for (const auto* v : {&mu.kappa, &mu.se, &ratio.kappa, &ratio.se}) {
      for (double x : *v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        table << "," << buf;
      }
    }
    table << "\n";
    for (int j = 1; j <= cfg.r; ++j) {
      rec.rows.push_back({"n", double(n), "kappa_" + std::to_string(j), mu.kappa[j - 1], mu.se[j - 1]});
      rec.rows.push_back({"n", double(n), "ratio_kappa_" + std::to_string(j), ratio.kappa[j - 1], ratio.se[j - 1]});
    }
    rec.checks.push_back(upper_check("weighted_sum_n=" + std::to_string(n), mu.weighted_sum, 1.0,
                                     k * mu.weighted_sum_se));
    Check nonneg;
    nonneg.name = "nonnegative_n=" + std::to_string(n);
    nonneg.value = *std::min_element(mu.kappa.begin(), mu.kappa.end());
    nonneg.passed = nonneg.value >= 0.0;
    rec.checks.push_back(nonneg);
    if (n == cfg.n_grid.back()) {
      rec.estimates["kappa"] = kappa_json(mu);
      rec.estimates["kappa_ratio"] = kappa_json(ratio);
    }
  }
  rec.tables.emplace_back("kappa", table.str());
  return rec;
}

RunRecord run_estimate_sigma(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const OffspringLaw law = cfg.law.build();
  const SamplerKind sampler = parse_sampler(cfg.sampler);
  const double k = cfg.threshold("se_margin");
  const int n = cfg.n_grid.back();
  const OccupancyBatch b = simulate_occupancy(law, cfg.d, n, cfg.r, cfg.trials, cfg.seed,
                                              label("estimate-sigma", "trees", n), cfg.threads, sampler);
  const KappaEstimate mu = estimate_mu(b);
  const CovarianceEstimate cov = estimate_A(b, mu);
  const CovMatrix st = sigma_tilde(cov, law.sigma2());
  const Eigen::VectorXd ev = sorted_eigenvalues(st.entries);

  std::vector<Eigen::VectorXd> boot(static_cast<std::size_t>(cfg.bootstrap));
  const std::uint64_t lab = label("estimate-sigma", "bootstrap", n);
  parallel_for(boot.size(), cfg.threads, [&](std::size_t i) {
    Stream s(cfg.seed, lab, i);
    const OccupancyBatch re = resample_batch(b, s);
    boot[i] = sorted_eigenvalues(0.5 * law.sigma2() * estimate_A(re, estimate_mu(re)).a_hat);
  });
  std::vector<double> ev_se(static_cast<std::size_t>(cfg.r));
  for (int j = 0; j < cfg.r; ++j) {
    std::vector<double> v;
    for (const auto& e : boot) v.push_back(e(j));
    ev_se[j] = summarize(v).sd;
  }

  rec.estimates["n"] = n;
  rec.estimates["trials"] = b.trials();
  rec.estimates["kappa"] = kappa_json(mu);
  rec.estimates["a_hat"] = matrix_json(cov.a_hat);
  rec.estimates["a_hat_se"] = matrix_json(cov.se);
  rec.estimates["sigma_tilde"] = matrix_json(st.entries);
  rec.estimates["sigma_tilde_eigenvalues"] = std::vector<double>(ev.data(), ev.data() + ev.size());
  rec.estimates["sigma_tilde_eigenvalue_se"] = ev_se;
  rec.estimates["a_hat_ratio_centred"] = matrix_json(estimate_A(b, estimate_mu_ratio(b)).a_hat);
  for (int j = 0; j < cfg.r; ++j) {
    rec.rows.push_back({"eigen_index", double(j + 1), "sigma_tilde_eigenvalue", ev(j), ev_se[j]});
  }
  if (ev(0) < k * ev_se[0]) {
    rec.warnings.push_back("DegenerateSigma: top eigenvalue " + fmt(ev(0)) + " is below " + fmt(k) + " SE");
  }
  Check diag;
  diag.name = "nonnegative_diagonal";
  diag.value = cov.a_hat.diagonal().minCoeff();
  diag.passed = diag.value >= 0.0;
  rec.checks.push_back(diag);
  rec.tables.emplace_back("A", matrix_csv(cov.a_hat));
  rec.tables.emplace_back("A_se", matrix_csv(cov.se));
  rec.tables.emplace_back("sigma_tilde", matrix_csv(st.entries));
  return rec;
}

RunRecord run_survival(const ExperimentConfig& cfg) {
  RunRecord rec = start_record(cfg);
  const OffspringLaw law = cfg.law.build();
  const double k = cfg.threshold("se_margin");
  const double limit = 2.0 / law.sigma2();
  rec.estimates["kolmogorov_limit"] = limit;

  for (int n : cfg.n_grid) {
    std::vector<char> alive(cfg.trials, 0);
    const std::uint64_t lab = label("survival", "trees", n);
    parallel_for(alive.size(), cfg.threads, [&](std::size_t t) {
      Stream rng(cfg.seed, lab, t);
      alive[t] = simulate_generation_sizes(law, n, rng).back() > 0;
    });
    const double T = static_cast<double>(cfg.trials);
    const double p_hat = static_cast<double>(std::count(alive.begin(), alive.end(), 1)) / T;
    const double se = std::sqrt(std::max(p_hat * (1.0 - p_hat), 1.0 / T) / T);
    const double exact = law.survival_exact(n);
    rec.reports.push_back({{"x", n}, {"exact", exact}, {"simulated", p_hat}, {"se", se}, {"trials", cfg.trials},
                           {"n_times_survival", n * exact}});
    rec.rows.push_back({"n", double(n), "survival_exact", exact, 0.0});
    rec.rows.push_back({"n", double(n), "survival_simulated", p_hat, se});
    Check c = upper_check("simulated_matches_exact_n=" + std::to_string(n), std::abs(p_hat - exact), 0.0, k * se);
    c.detail = fmt(p_hat) + " vs " + fmt(exact);
    rec.checks.push_back(c);
  }
  const double at_small = std::abs(100 * law.survival_exact(100) - limit);
  const double at_large = std::abs(10000 * law.survival_exact(10000) - limit);
  rec.estimates["kolmogorov_gap_n=100"] = at_small;
  rec.estimates["kolmogorov_gap_n=10000"] = at_large;
  Check kc;
  kc.name = "kolmogorov_trend";
  kc.value = at_large;
  kc.reference = at_small;
  kc.passed = at_large < at_small;
  kc.detail = "|n P(Z_n > 0) - 2 / sigma^2| at n = 10000 against n = 100";
  rec.checks.push_back(kc);
  return rec;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  const std::string& e = cfg.experiment;
  if (e == "yaglom") rec = run_yaglom(cfg);
  else if (e == "theorem1") rec = run_theorem1(cfg);
  else if (e == "theorem3") rec = run_theorem3(cfg);
  else if (e == "decomposition") rec = run_decomposition_gap(cfg);
  else if (e == "random-sum") rec = run_random_sum_suite(cfg);
  else if (e == "clt") rec = run_clt_suite(cfg);
  else if (e == "estimate-kappa") rec = run_estimate_kappa(cfg);
  else if (e == "estimate-sigma") rec = run_estimate_sigma(cfg);
  else rec = run_survival(cfg);
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error(ErrorKind::config, "cannot write " + path.string());
  out << text;
}

}  // namespace

void write_outputs(const RunRecord& rec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::config, "cannot create output directory " + dir.string() + ": " + ec.message());
  write_file(dir / (rec.suite + ".jsonl"), rec.to_json().dump() + "\n", true);

  std::ostringstream summary;
  summary << "check,asserted,passed,value,reference,margin,detail\n";
  for (const auto& c : rec.checks) {
    summary << csv_field(c.name) << "," << c.asserted << "," << c.passed << "," << num(c.value) << ","
            << num(c.reference) << "," << num(c.margin) << "," << csv_field(c.detail) << "\n";
  }
  write_file(dir / (rec.suite + "_summary.csv"), summary.str());

  std::ostringstream rows;
  rows << "grid,x,statistic,value,se\n";
  for (const auto& r : rec.rows) {
    rows << r.grid << "," << num(r.x) << "," << csv_field(r.statistic) << "," << num(r.value) << "," << num(r.se)
         << "\n";
  }
  write_file(dir / (rec.suite + "_long.csv"), rows.str());
  for (const auto& [suffix, text] : rec.tables) write_file(dir / (rec.suite + "_" + suffix + ".csv"), text);
}

}  // namespace brw
