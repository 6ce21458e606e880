#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

/// Walker/Vose alias table over a finite weight vector.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> weights);

  std::uint32_t sample(Stream& rng) const noexcept {
    const double u = rng.uniform() * static_cast<double>(prob_.size());
    auto i = static_cast<std::uint32_t>(u);
    if (i >= prob_.size()) i = static_cast<std::uint32_t>(prob_.size() - 1);
    return (u - i) < prob_[i] ? i : alias_[i];
  }

  std::size_t size() const noexcept { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// A critical offspring distribution on {0, 1, ..., K} with exact moments.
///
/// Immutable after construction; sampling takes the caller's stream, so a
/// single law can be shared by concurrent trials.
class OffspringLaw {
 public:
  static constexpr double kTolerance = 1e-12;

  /// Validating constructor. Throws NotNormalized, NotCritical or
  /// DegenerateVariance when the standing assumptions on the law fail.
  static OffspringLaw make(const std::map<std::uint32_t, double>& pmf, std::string name = "custom",
                           std::optional<int> high_moment_order = std::nullopt);

  /// Only checks that the pmf is normalized; for deterministic checks with
  /// non-critical laws such as the point mass {2: 1}.
  static OffspringLaw unchecked(const std::map<std::uint32_t, double>& pmf, std::string name = "unchecked");

  /// {0: 1/2, 2: 1/2}.
  static OffspringLaw binary();
  /// P(X = k) = p (1 - p)^k, truncated at `cutoff` (0: smallest cutoff whose
  /// tail mass is below 1e-15) and renormalized.
  static OffspringLaw geometric(double p = 0.5, std::uint32_t cutoff = 0);
  /// Poisson(lambda), truncated at tail mass 1e-15 and renormalized.
  static OffspringLaw poisson(double lambda = 1.0);

  const std::string& name() const noexcept { return name_; }
  std::span<const double> pmf() const noexcept { return pmf_; }
  double prob(std::uint32_t k) const noexcept { return k < pmf_.size() ? pmf_[k] : 0.0; }
  std::uint32_t max_offspring() const noexcept { return static_cast<std::uint32_t>(pmf_.size() - 1); }

  double mean() const noexcept { return mean_; }
  double sigma2() const noexcept { return sigma2_; }
  double moment3() const noexcept { return moment3_; }
  /// E[X^p] for the configured order, if any.
  std::optional<double> moment_high() const noexcept { return moment_high_; }
  std::optional<int> high_moment_order() const noexcept { return high_order_; }
  /// E[X^p] by finite summation.
  double moment(int p) const noexcept;
  bool immortal() const noexcept { return pmf_[0] == 0.0; }

  std::uint32_t sample(Stream& rng) const noexcept { return alias_.sample(rng); }

  /// f(s) = sum_k P(X = k) s^k.
  double pgf(double s) const noexcept;
  /// n-fold composition f_n(s); f_0(s) = s. s is clamped to [0, 1].
  double pgf_iterate(int n, double s) const;
  /// P(Z_n > 0) = 1 - f_n(0).
  double survival_exact(int n) const;
  /// q_k = f_k(0) = P(Z_k = 0) for k = 0..n.
  std::vector<double> extinction_probabilities(int n) const;

 private:
  OffspringLaw() = default;

  std::string name_;
  std::vector<double> pmf_;
  double mean_ = 0.0;
  double sigma2_ = 0.0;
  double moment3_ = 0.0;
  std::optional<double> moment_high_;
  std::optional<int> high_order_;
  AliasTable alias_;
};

/// P(X^s = k) = k P(X = k) / E[X].
class SizeBiasedLaw {
 public:
  explicit SizeBiasedLaw(const OffspringLaw& base);

  std::span<const double> pmf() const noexcept { return pmf_; }
  double prob(std::uint32_t k) const noexcept { return k < pmf_.size() ? pmf_[k] : 0.0; }
  std::uint32_t sample(Stream& rng) const noexcept { return alias_.sample(rng); }

 private:
  std::vector<double> pmf_;
  AliasTable alias_;
};

SizeBiasedLaw size_biased(const OffspringLaw& law);

}  // namespace brw
