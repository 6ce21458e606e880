#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "brw/gw_tree.hpp"
#include "brw/lattice.hpp"
#include "brw/offspring_law.hpp"
#include "brw/reference_laws.hpp"

namespace brw {

enum class SamplerKind {
  /// Reduced spine sampler; exact for all horizon statistics.
  pruned_spine,
  /// Full spine sampler without left subtrees.
  spine,
  /// Whole-tree rejection.
  rejection,
  /// Plain Galton-Watson trees (including extinct ones).
  unconditioned,
};

SamplerKind parse_sampler(const std::string& name);
std::string to_string(SamplerKind kind);

/// Per-tree occupancy spectra of a batch of trials.
struct OccupancyBatch {
  int n = 0;
  int d = 0;
  int r = 0;
  SamplerKind sampler = SamplerKind::pruned_spine;
  /// P(Z_n > 0) for conditioned batches, 1 for unconditioned ones.
  double survival_factor = 1.0;
  std::vector<std::int64_t> z;
  /// m[t * r + (j - 1)] = M_n(j) of trial t.
  std::vector<std::int64_t> m;
  std::vector<std::int64_t> overflow_mass;

  std::size_t trials() const noexcept { return z.size(); }
  std::int64_t count(std::size_t t, int j) const { return m[t * static_cast<std::size_t>(r) + (j - 1)]; }
};

/// Simulates `trials` trees; trial t uses Stream(seed, label, t).
OccupancyBatch simulate_occupancy(const OffspringLaw& law, int d, int n, int r, std::size_t trials,
                                  std::uint64_t seed, std::uint64_t label, unsigned threads,
                                  SamplerKind sampler = SamplerKind::pruned_spine);

struct KappaEstimate {
  int r = 0;
  int n_used = 0;
  std::size_t trials = 0;
  double survival_used = 1.0;
  std::vector<double> kappa;
  std::vector<double> se;
  /// sum_{j <= r} j kappa_j with its SE from the per-trial sums.
  double weighted_sum = 0.0;
  double weighted_sum_se = 0.0;
};

/// mu_n(j) = survival * mean of M_n(j).
KappaEstimate estimate_mu(const OccupancyBatch& batch);

/// mu_n(j) = sum of M_n(j) / sum of Z_n over the batch. Uses E[Z_n | Z_n > 0] = 1 / P(Z_n > 0);
/// the error is driven by M_n(j) - mu Z_n instead of M_n(j).
KappaEstimate estimate_mu_ratio(const OccupancyBatch& batch);

KappaEstimate estimate_mu_kappa(const OffspringLaw& law, int d, int n, int r, std::size_t trials, Stream& rng,
                                unsigned threads = 1);

struct CovarianceEstimate {
  int r = 0;
  int n_used = 0;
  std::size_t trials = 0;
  Eigen::MatrixXd a_hat;
  Eigen::MatrixXd se;
};

/// A_n(j,k) = survival * mean of U_j U_k, U_j = M_n(j) - mu_j Z_n.
CovarianceEstimate estimate_A(const OccupancyBatch& batch, const KappaEstimate& mu);

CovarianceEstimate estimate_A(const OffspringLaw& law, int d, int n, int r, std::size_t trials, Stream& rng,
                              unsigned threads = 1);

/// survival * mean of (M_n(j) - mu Z_n)^power.
double centered_moment(const OccupancyBatch& batch, int j, double mu, int power);

struct FourthMomentRatio {
  double fourth = 0.0;
  double fourth_se = 0.0;
  double companion = 0.0;
  double companion_se = 0.0;
  double ratio = 0.0;
  double ratio_se = 0.0;
};

/// n^{-1} E[(M_n(j) - mu_n(j) Z_n)^4] against 3 sigma^2 A_n(j,j)^2.
FourthMomentRatio fourth_moment_ratio(const OccupancyBatch& batch, const KappaEstimate& mu,
                                      const CovarianceEstimate& cov, double sigma2, int j);

FourthMomentRatio fourth_moment_ratio(const OffspringLaw& law, int d, int n, int j, std::size_t trials,
                                      Stream& rng, unsigned threads = 1);

/// (sigma2 / 2) A, repaired to a valid covariance by sqrt_factor.
CovMatrix sigma_tilde(const CovarianceEstimate& cov, double sigma2);

}  // namespace brw
