#include "brw/reference_laws.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "brw/error.hpp"

namespace brw {

CovMatrix sqrt_factor(const Eigen::MatrixXd& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw Error(ErrorKind::invalid_argument, "covariance must be a non-empty square matrix");
  }
  const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, entries.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::invalid_argument, "covariance is not symmetric");
  }
  const Eigen::MatrixXd sym = 0.5 * (entries + entries.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  CovMatrix c;
  c.entries = sym;
  c.eigenvalues = lambda;
  std::vector<int> keep;
  for (int i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < -kEigenClip) {
      throw Error(ErrorKind::not_psd, "eigenvalue " + std::to_string(lambda[i]) + " below -1e-10");
    }
    if (lambda[i] < 0.0) c.clipped = true;
    if (lambda[i] > kEigenClip) keep.push_back(i);
  }
  c.factor.resize(sym.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    c.factor.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(keep[k]) * std::sqrt(lambda[keep[k]]);
  }
  return c;
}

double sample_exp(double rate, Stream& rng) {
  if (!(rate > 0.0)) throw Error(ErrorKind::invalid_argument, "rate must be positive");
  return rng.exponential(rate);
}

Eigen::VectorXd sample_mvn(const CovMatrix& cov, Stream& rng) {
  Eigen::VectorXd z(cov.factor.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  if (z.size() == 0) return Eigen::VectorXd::Zero(cov.r());
  return cov.factor * z;
}

Eigen::VectorXd sample_sl(const CovMatrix& cov, Stream& rng) {
  const double e = rng.exponential(1.0);
  return std::sqrt(e) * sample_mvn(cov, rng);
}

double sl_cf(const CovMatrix& cov, const Eigen::VectorXd& u) {
  if (u.size() != cov.r()) throw Error(ErrorKind::size_mismatch, "argument dimension differs from covariance");
  return 1.0 / (1.0 + 0.5 * u.dot(cov.entries * u));
}

double sl1_cdf(double s2, double x) {
  if (!(s2 > 0.0)) throw Error(ErrorKind::invalid_argument, "variance must be positive");
  const double b = std::sqrt(s2 / 2.0);
  return x < 0.0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
}

std::uint64_t sample_geometric_count(double q, Stream& rng) {
  if (q >= 1.0) return 1;
  const double e = rng.exponential(1.0);
  const double v = std::ceil(e / -std::log1p(-q));
  return v < 1.0 ? 1 : static_cast<std::uint64_t>(v);
}

StoppingLaw StoppingLaw::geometric(double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorKind::invalid_mu, "geometric parameter must lie in (0,1)");
  StoppingLaw s;
  s.geometric_ = true;
  s.q_ = q;
  s.mean_ = 1.0 / q;
  return s;
}

StoppingLaw StoppingLaw::from_pmf(const std::map<std::uint64_t, double>& pmf) {
  if (pmf.empty() || pmf.begin()->first < 1) throw Error(ErrorKind::invalid_argument, "stopping law must live on {1,2,...}");
  StoppingLaw s;
  const std::uint64_t kmax = pmf.rbegin()->first;
  s.pmf_.assign(kmax + 1, 0.0);
  double total = 0.0, mean = 0.0;
  for (const auto& [k, p] : pmf) {
    if (p < 0.0) throw Error(ErrorKind::invalid_argument, "negative probability");
    s.pmf_[k] = p;
    total += p;
    mean += static_cast<double>(k) * p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::not_normalized, "stopping law does not sum to 1");
  if (!(mean > 1.0)) throw Error(ErrorKind::invalid_mu, "stopping law mean must exceed 1");
  s.mean_ = mean;
  s.cdf_.resize(s.pmf_.size());
  std::partial_sum(s.pmf_.begin(), s.pmf_.end(), s.cdf_.begin());
  return s;
}

StoppingLaw StoppingLaw::deterministic(std::uint64_t k) { return from_pmf({{k, 1.0}}); }

std::uint64_t StoppingLaw::sample(Stream& rng) const {
  if (geometric_) return sample_geometric_count(q_, rng);
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto k = static_cast<std::uint64_t>(it - cdf_.begin());
  return std::min<std::uint64_t>(k, cdf_.size() - 1);
}

double StoppingLaw::w1_to_geometric() const {
  if (geometric_) return 0.0;
  // F_Geo(k) = 1 - (1 - q)^k on {1, 2, ...}.
  const double q = 1.0 / mean_;
  double acc = 0.0;
  double surv_geo = 1.0;
  for (std::uint64_t k = 0;; ++k) {
    const double fm = k < cdf_.size() ? cdf_[k] : 1.0;
    const double fg = 1.0 - surv_geo;
    acc += std::abs(fm - fg);
    if (k >= cdf_.size() && surv_geo < 1e-17) break;
    surv_geo *= (1.0 - q);
  }
  return acc;
}

GeometricSumSpec make_geometric_sum_spec(SummandSampler summand, StoppingLaw stopping, int r, Stream& rng,
                                         std::size_t draws) {
  if (r < 1) throw Error(ErrorKind::invalid_argument, "dimension must be at least 1");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(r), sq = Eigen::VectorXd::Zero(r);
  for (std::size_t i = 0; i < draws; ++i) {
    const Eigen::VectorXd x = summand(rng);
    if (x.size() != r) throw Error(ErrorKind::size_mismatch, "summand dimension differs from r");
    sum += x;
    sq += x.cwiseProduct(x);
  }
  const double n = static_cast<double>(draws);
  for (int k = 0; k < r; ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sq[k] / n - mean * mean);
    const double se = std::sqrt(var / n);
    if (std::abs(mean) > 4.0 * se + 1e-12) {
      throw Error(ErrorKind::invalid_argument, "summand coordinate " + std::to_string(k) + " is not centred");
    }
  }
  return GeometricSumSpec{std::move(summand), std::move(stopping), r};
}

Eigen::VectorXd sample_geometric_sum(const GeometricSumSpec& spec, Stream& rng) {
  const std::uint64_t m = spec.stopping.sample(rng);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec.r);
  for (std::uint64_t i = 0; i < m; ++i) acc += spec.summand(rng);
  return acc / std::sqrt(spec.stopping.mean());
}

double default_renyi_constant(int r) {
  if (r < 1) throw Error(ErrorKind::invalid_argument, "dimension must be at least 1");
  const double qr2 = static_cast<double>(r);
  return 2.0 * qr2 * std::cbrt(2.0 * r);
}

double renyi_bound(double mu, double third_moment_l1, const std::vector<double>& sigma_diag, double dw_m_geo,
                   double c_r) {
  if (!(mu > 1.0)) throw Error(ErrorKind::invalid_mu, "mean of M must exceed 1");
  double root_sum = 0.0;
  for (double s : sigma_diag) root_sum += std::sqrt(std::max(0.0, s));
  return (c_r * std::cbrt(mu) * std::cbrt(third_moment_l1) + root_sum * dw_m_geo + 3.5) / std::sqrt(mu);
}

double clt_bound(int r, double n, double third_moment_l2) {
  if (!(n >= 1.0)) throw Error(ErrorKind::invalid_argument, "n must be at least 1");
  return 2.0 * std::cbrt(2.0 * r * third_moment_l2 / std::sqrt(n));
}

double mvn_compare_bound(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double c) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::size_mismatch, "matrix shapes differ");
  return c * std::sqrt((a - b).cwiseAbs().sum());
}

}  // namespace brw
