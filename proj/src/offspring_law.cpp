#include "brw/offspring_law.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "brw/error.hpp"

namespace brw {

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t k = weights.size();
  if (k == 0) throw Error(ErrorKind::invalid_argument, "alias table needs at least one weight");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorKind::invalid_argument, "alias table weights sum to zero");

  prob_.assign(k, 0.0);
  alias_.assign(k, 0);
  std::vector<double> scaled(k);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < k; ++i) {
    scaled[i] = weights[i] * static_cast<double>(k) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    small.pop_back();
    const std::uint32_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (std::uint32_t i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  // Leftovers in `small` are rounding residue; their mass is ~1.
  for (std::uint32_t i : small) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  // Zero-weight entries must never be returned.
  for (std::size_t i = 0; i < k; ++i) {
    if (weights[i] == 0.0) prob_[i] = 0.0;
  }
}

namespace {

std::vector<double> dense_pmf(const std::map<std::uint32_t, double>& pmf) {
  if (pmf.empty()) throw Error(ErrorKind::invalid_argument, "empty pmf");
  const std::uint32_t kmax = pmf.rbegin()->first;
  std::vector<double> dense(static_cast<std::size_t>(kmax) + 1, 0.0);
  for (const auto& [k, p] : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      std::ostringstream os;
      os << "probability at k=" << k << " is " << p;
      throw Error(ErrorKind::invalid_argument, os.str());
    }
    dense[k] = p;
  }
  while (dense.size() > 1 && dense.back() == 0.0) dense.pop_back();

  const double total = std::accumulate(dense.begin(), dense.end(), 0.0);
  if (std::abs(total - 1.0) > OffspringLaw::kTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "probabilities sum to " << total;
    throw Error(ErrorKind::not_normalized, os.str());
  }
  return dense;
}

}  // namespace

OffspringLaw OffspringLaw::unchecked(const std::map<std::uint32_t, double>& pmf, std::string name) {
  OffspringLaw law;
  law.name_ = std::move(name);
  law.pmf_ = dense_pmf(pmf);
  law.mean_ = law.moment(1);
  law.sigma2_ = law.moment(2) - law.mean_ * law.mean_;
  law.moment3_ = law.moment(3);
  law.alias_ = AliasTable(law.pmf_);
  return law;
}

OffspringLaw OffspringLaw::make(const std::map<std::uint32_t, double>& pmf, std::string name,
                                std::optional<int> high_moment_order) {
  OffspringLaw law;
  law.name_ = std::move(name);
  law.pmf_ = dense_pmf(pmf);
  law.mean_ = law.moment(1);
  if (std::abs(law.mean_ - 1.0) > kTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "mean is " << law.mean_ << ", expected 1";
    throw Error(ErrorKind::not_critical, os.str());
  }
  law.sigma2_ = law.moment(2) - law.mean_ * law.mean_;
  if (!(law.sigma2_ > kTolerance)) throw Error(ErrorKind::degenerate_variance, "Var(X) = 0");
  law.moment3_ = law.moment(3);
  if (high_moment_order) {
    law.high_order_ = high_moment_order;
    law.moment_high_ = law.moment(*high_moment_order);
  }
  law.alias_ = AliasTable(law.pmf_);
  return law;
}

OffspringLaw OffspringLaw::binary() { return make({{0, 0.5}, {2, 0.5}}, "binary"); }

OffspringLaw OffspringLaw::geometric(double p, std::uint32_t cutoff) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::invalid_argument, "geometric p must lie in (0,1)");
  if (cutoff == 0) {
    // Tail mass P(X > K) = (1 - p)^(K + 1).
    cutoff = static_cast<std::uint32_t>(std::ceil(std::log(1e-15) / std::log1p(-p)));
  }
  std::vector<double> w(cutoff + 1);
  for (std::uint32_t k = 0; k <= cutoff; ++k) w[k] = p * std::pow(1.0 - p, k);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::map<std::uint32_t, double> pmf;
  for (std::uint32_t k = 0; k <= cutoff; ++k) pmf[k] = w[k] / total;
  std::ostringstream os;
  os << "geometric(" << p << ")";
  return make(pmf, os.str());
}

OffspringLaw OffspringLaw::poisson(double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_argument, "poisson lambda must be positive");
  std::vector<double> w;
  double term = std::exp(-lambda);
  double cumulative = 0.0;
  for (std::uint32_t k = 0;; ++k) {
    if (k > 0) term *= lambda / k;
    w.push_back(term);
    cumulative += term;
    if (1.0 - cumulative < 1e-15 && k > lambda) break;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::map<std::uint32_t, double> pmf;
  for (std::uint32_t k = 0; k < w.size(); ++k) pmf[k] = w[k] / total;
  std::ostringstream os;
  os << "poisson(" << lambda << ")";
  return make(pmf, os.str());
}

double OffspringLaw::moment(int p) const noexcept {
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf_.size(); ++k) acc += pmf_[k] * std::pow(static_cast<double>(k), p);
  return acc;
}

double OffspringLaw::pgf(double s) const noexcept {
  double acc = 0.0;
  for (std::size_t k = pmf_.size(); k-- > 0;) acc = acc * s + pmf_[k];
  return acc;
}

double OffspringLaw::pgf_iterate(int n, double s) const {
  if (n < 0) throw Error(ErrorKind::invalid_argument, "generation count must be non-negative");
  s = std::clamp(s, 0.0, 1.0);
  for (int i = 0; i < n; ++i) s = std::clamp(pgf(s), 0.0, 1.0);
  return s;
}

double OffspringLaw::survival_exact(int n) const { return 1.0 - pgf_iterate(n, 0.0); }

std::vector<double> OffspringLaw::extinction_probabilities(int n) const {
  if (n < 0) throw Error(ErrorKind::invalid_argument, "generation count must be non-negative");
  std::vector<double> q(static_cast<std::size_t>(n) + 1);
  q[0] = 0.0;
  for (int k = 1; k <= n; ++k) q[k] = std::clamp(pgf(q[k - 1]), 0.0, 1.0);
  return q;
}

SizeBiasedLaw::SizeBiasedLaw(const OffspringLaw& base) {
  const auto p = base.pmf();
  pmf_.assign(p.size(), 0.0);
  for (std::size_t k = 1; k < p.size(); ++k) pmf_[k] = static_cast<double>(k) * p[k] / base.mean();
  alias_ = AliasTable(pmf_);
}

SizeBiasedLaw size_biased(const OffspringLaw& law) { return SizeBiasedLaw(law); }

}  // namespace brw
