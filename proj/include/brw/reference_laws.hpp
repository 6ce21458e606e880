#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "brw/rng.hpp"

namespace brw {

inline constexpr double kEigenClip = 1e-10;

/// Symmetric non-negative definite matrix with a factor F, F F^T = entries.
struct CovMatrix {
  Eigen::MatrixXd entries;
  /// r x k, k = number of eigenvalues above the clipping threshold.
  Eigen::MatrixXd factor;
  Eigen::VectorXd eigenvalues;
  /// True when a negative eigenvalue in [-1e-10, 0) was clipped to zero.
  bool clipped = false;

  int r() const noexcept { return static_cast<int>(entries.rows()); }
};

/// Spectral square-root factor. Throws NotPSD below -1e-10 and
/// InvalidArgument for non-symmetric input.
CovMatrix sqrt_factor(const Eigen::MatrixXd& entries);

double sample_exp(double rate, Stream& rng);
Eigen::VectorXd sample_mvn(const CovMatrix& cov, Stream& rng);
/// sqrt(E) Z with E ~ Exp(1) and Z ~ N(0, cov).
Eigen::VectorXd sample_sl(const CovMatrix& cov, Stream& rng);
/// 1 / (1 + u^T cov u / 2).
double sl_cf(const CovMatrix& cov, const Eigen::VectorXd& u);
/// CDF of the one-dimensional SL_1(s2), a Laplace law with scale sqrt(s2/2).
double sl1_cdf(double s2, double x);

/// Law of the number of summands M >= 1.
class StoppingLaw {
 public:
  /// Geo(q) on {1, 2, ...} with mean 1/q.
  static StoppingLaw geometric(double q);
  /// Arbitrary law on {1, 2, ...}; mean must exceed 1.
  static StoppingLaw from_pmf(const std::map<std::uint64_t, double>& pmf);
  /// Point mass at k >= 2.
  static StoppingLaw deterministic(std::uint64_t k);

  double mean() const noexcept { return mean_; }
  bool is_geometric() const noexcept { return geometric_; }
  std::uint64_t sample(Stream& rng) const;
  /// Exact d_W(L(M), Geo(1/mean)) = sum_k |F_M(k) - F_Geo(k)|.
  double w1_to_geometric() const;

 private:
  StoppingLaw() = default;
  bool geometric_ = false;
  double q_ = 0.0;
  double mean_ = 0.0;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

/// Geo(q) draw on {1, 2, ...} via ceil(E / -log(1 - q)).
std::uint64_t sample_geometric_count(double q, Stream& rng);

using SummandSampler = std::function<Eigen::VectorXd(Stream&)>;

struct GeometricSumSpec {
  SummandSampler summand;
  StoppingLaw stopping;
  int r = 1;
};

/// Validates that the summand mean is zero within 4 SE over `draws` draws
/// and returns the assembled GeometricSumSpec. Throws InvalidArgument otherwise.
GeometricSumSpec make_geometric_sum_spec(SummandSampler summand, StoppingLaw stopping, int r, Stream& rng,
                                         std::size_t draws = 100000);

/// mean^{-1/2} * sum_{i=1}^{M} X_i.
Eigen::VectorXd sample_geometric_sum(const GeometricSumSpec& spec, Stream& rng);

/// C_r = 2 q_r^2 (2r)^{1/3} with the norm-equivalence constant q_r = sqrt(r).
double default_renyi_constant(int r);

/// mu^{-1/2} (C_r mu^{1/3} E[|X|_1^3]^{1/3} + (sum_i sqrt(Sigma_ii)) dW + 3.5).
double renyi_bound(double mu, double third_moment_l1, const std::vector<double>& sigma_diag, double dw_m_geo,
                   double c_r);

/// 2 (2 r E|X|^3 / sqrt(n))^{1/3}.
double clt_bound(int r, double n, double third_moment_l2);

/// C (sum_{u,v} |a_uv - b_uv|)^{1/2}.
double mvn_compare_bound(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double c);

}  // namespace brw
