#include "brw/estimators.hpp"

#include <cmath>

#include "brw/error.hpp"
#include "brw/parallel.hpp"

namespace brw {

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments mean_se(const std::vector<double>& v) {
  Moments m;
  const auto n = static_cast<double>(v.size());
  if (v.empty()) return m;
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

void check_batch(const OccupancyBatch& b, int j) {
  if (b.trials() == 0) throw Error(ErrorKind::invalid_argument, "empty batch");
  if (j < 1 || j > b.r) throw Error(ErrorKind::invalid_argument, "multiplicity outside 1..r");
}

}  // namespace

SamplerKind parse_sampler(const std::string& name) {
  if (name == "pruned") return SamplerKind::pruned_spine;
  if (name == "spine") return SamplerKind::spine;
  if (name == "rejection") return SamplerKind::rejection;
  if (name == "unconditioned") return SamplerKind::unconditioned;
  throw Error(ErrorKind::config, "unknown sampler '" + name + "' (pruned, spine, rejection, unconditioned)");
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::pruned_spine: return "pruned";
    case SamplerKind::spine: return "spine";
    case SamplerKind::rejection: return "rejection";
    case SamplerKind::unconditioned: return "unconditioned";
  }
  return "unknown";
}

OccupancyBatch simulate_occupancy(const OffspringLaw& law, int d, int n, int r, std::size_t trials,
                                  std::uint64_t seed, std::uint64_t label, unsigned threads,
                                  SamplerKind sampler) {
  if (r < 1) throw Error(ErrorKind::invalid_argument, "truncation level must be at least 1");
  OccupancyBatch b;
  b.n = n;
  b.d = d;
  b.r = r;
  b.sampler = sampler;
  b.survival_factor = sampler == SamplerKind::unconditioned ? 1.0 : law.survival_exact(n);
  b.z.assign(trials, 0);
  b.m.assign(trials * static_cast<std::size_t>(r), 0);
  b.overflow_mass.assign(trials, 0);

  const LatticeConfig cfg(d);
  std::optional<SpineSampler> spine;
  if (sampler == SamplerKind::pruned_spine || sampler == SamplerKind::spine) {
    SpineOptions opt;
    opt.prune = sampler == SamplerKind::pruned_spine;
    spine.emplace(law, n, opt);
  }
  parallel_for(trials, threads, [&](std::size_t t) {
    Stream rng(seed, label, t);
    ConditionedForest f;
    switch (sampler) {
      case SamplerKind::pruned_spine:
      case SamplerKind::spine: f = spine->sample(rng); break;
      case SamplerKind::rejection: f = sample_conditioned_rejection(law, n, rng); break;
      case SamplerKind::unconditioned: f = simulate_tree(law, n, rng); break;
    }
    const Cloud cloud = embed_horizon(f, cfg, rng);
    const OccupancySpectrum s = occupancy_spectrum(cloud, r);
    b.z[t] = s.z_n;
    for (int j = 1; j <= r; ++j) b.m[t * static_cast<std::size_t>(r) + (j - 1)] = s.count(j);
    b.overflow_mass[t] = s.overflow_mass;
  });
  return b;
}

KappaEstimate estimate_mu(const OccupancyBatch& b) {
  check_batch(b, 1);
  KappaEstimate k;
  k.r = b.r;
  k.n_used = b.n;
  k.trials = b.trials();
  k.survival_used = b.survival_factor;
  const double s = b.survival_factor;
  std::vector<double> v(b.trials()), w(b.trials(), 0.0);
  for (int j = 1; j <= b.r; ++j) {
    for (std::size_t t = 0; t < b.trials(); ++t) {
      v[t] = static_cast<double>(b.count(t, j));
      w[t] += j * v[t];
    }
    const Moments mj = mean_se(v);
    k.kappa.push_back(s * mj.mean);
    k.se.push_back(s * mj.se);
  }
  const Moments ws = mean_se(w);
  k.weighted_sum = s * ws.mean;
  k.weighted_sum_se = s * ws.se;
  return k;
}

KappaEstimate estimate_mu_ratio(const OccupancyBatch& b) {
  check_batch(b, 1);
  KappaEstimate k;
  k.r = b.r;
  k.n_used = b.n;
  k.trials = b.trials();
  k.survival_used = b.survival_factor;
  double zsum = 0.0;
  for (auto z : b.z) zsum += static_cast<double>(z);
  if (zsum <= 0.0) throw Error(ErrorKind::invalid_argument, "batch has no particles at the horizon");
  const double zbar = zsum / static_cast<double>(b.trials());
  std::vector<double> u(b.trials()), w(b.trials(), 0.0);
  for (int j = 1; j <= b.r; ++j) {
    double msum = 0.0;
    for (std::size_t t = 0; t < b.trials(); ++t) msum += static_cast<double>(b.count(t, j));
    const double kap = msum / zsum;
    for (std::size_t t = 0; t < b.trials(); ++t) {
      u[t] = static_cast<double>(b.count(t, j)) - kap * static_cast<double>(b.z[t]);
      w[t] += j * u[t];
    }
    k.kappa.push_back(kap);
    k.se.push_back(mean_se(u).se / zbar);
    k.weighted_sum += j * kap;
  }
  k.weighted_sum_se = mean_se(w).se / zbar;
  return k;
}

KappaEstimate estimate_mu_kappa(const OffspringLaw& law, int d, int n, int r, std::size_t trials, Stream& rng,
                                unsigned threads) {
  const std::uint64_t seed = rng();
  return estimate_mu(simulate_occupancy(law, d, n, r, trials, seed, stream_label("estimate-kappa"), threads));
}

CovarianceEstimate estimate_A(const OccupancyBatch& b, const KappaEstimate& mu) {
  check_batch(b, 1);
  if (mu.r < b.r) throw Error(ErrorKind::size_mismatch, "mean estimate has fewer entries than the batch");
  const int r = b.r;
  const std::size_t T = b.trials();
  const double s = b.survival_factor;
  CovarianceEstimate c;
  c.r = r;
  c.n_used = b.n;
  c.trials = T;
  c.a_hat = Eigen::MatrixXd::Zero(r, r);
  c.se = Eigen::MatrixXd::Zero(r, r);

  Eigen::MatrixXd u(T, r);
  for (std::size_t t = 0; t < T; ++t) {
    for (int j = 1; j <= r; ++j) {
      u(t, j - 1) = static_cast<double>(b.count(t, j)) - mu.kappa[j - 1] * static_cast<double>(b.z[t]);
    }
  }
  std::vector<double> prod(T), zu(T);
  for (int j = 0; j < r; ++j) {
    for (int k = j; k < r; ++k) {
      for (std::size_t t = 0; t < T; ++t) prod[t] = u(t, j) * u(t, k);
      const Moments p = mean_se(prod);
      // Derivative of s * mean(U_j U_k) in mu_j is -s * mean(Z U_k).
      double var = s * s * p.se * p.se;
      for (int side = 0; side < 2; ++side) {
        const int a = side == 0 ? j : k;
        const int other = side == 0 ? k : j;
        for (std::size_t t = 0; t < T; ++t) zu[t] = static_cast<double>(b.z[t]) * u(t, other);
        const double deriv = -s * mean_se(zu).mean;
        var += deriv * deriv * mu.se[a] * mu.se[a];
      }
      c.a_hat(j, k) = c.a_hat(k, j) = s * p.mean;
      c.se(j, k) = c.se(k, j) = std::sqrt(var);
    }
  }
  return c;
}

CovarianceEstimate estimate_A(const OffspringLaw& law, int d, int n, int r, std::size_t trials, Stream& rng,
                              unsigned threads) {
  const std::uint64_t seed = rng();
  const OccupancyBatch b = simulate_occupancy(law, d, n, r, trials, seed, stream_label("estimate-sigma"), threads);
  return estimate_A(b, estimate_mu(b));
}

double centered_moment(const OccupancyBatch& b, int j, double mu, int power) {
  check_batch(b, j);
  double acc = 0.0;
  for (std::size_t t = 0; t < b.trials(); ++t) {
    const double u = static_cast<double>(b.count(t, j)) - mu * static_cast<double>(b.z[t]);
    acc += std::pow(u, power);
  }
  return b.survival_factor * acc / static_cast<double>(b.trials());
}

FourthMomentRatio fourth_moment_ratio(const OccupancyBatch& b, const KappaEstimate& mu,
                                      const CovarianceEstimate& cov, double sigma2, int j) {
  check_batch(b, j);
  const double s = b.survival_factor;
  const double mj = mu.kappa[j - 1];
  std::vector<double> u4(b.trials());
  for (std::size_t t = 0; t < b.trials(); ++t) {
    const double u = static_cast<double>(b.count(t, j)) - mj * static_cast<double>(b.z[t]);
    u4[t] = u * u * u * u;
  }
  const Moments m4 = mean_se(u4);
  FourthMomentRatio f;
  f.fourth = s * m4.mean / b.n;
  f.fourth_se = s * m4.se / b.n;
  const double a = cov.a_hat(j - 1, j - 1);
  f.companion = 3.0 * sigma2 * a * a;
  f.companion_se = 6.0 * sigma2 * std::abs(a) * cov.se(j - 1, j - 1);
  f.ratio = f.fourth / f.companion;
  f.ratio_se = std::abs(f.ratio) * std::hypot(f.fourth_se / f.fourth, f.companion_se / f.companion);
  return f;
}

FourthMomentRatio fourth_moment_ratio(const OffspringLaw& law, int d, int n, int j, std::size_t trials,
                                      Stream& rng, unsigned threads) {
  const std::uint64_t seed = rng();
  const OccupancyBatch b = simulate_occupancy(law, d, n, j, trials, seed, stream_label("fourth-moment"), threads);
  const KappaEstimate mu = estimate_mu_ratio(b);
  return fourth_moment_ratio(b, mu, estimate_A(b, mu), law.sigma2(), j);
}

CovMatrix sigma_tilde(const CovarianceEstimate& cov, double sigma2) {
  return sqrt_factor(0.5 * sigma2 * cov.a_hat);
}

}  // namespace brw
