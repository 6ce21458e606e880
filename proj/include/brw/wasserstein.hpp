#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "brw/rng.hpp"

namespace brw {

inline constexpr std::size_t kDefaultMatchingCap = 512;

struct DistanceReport {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  std::optional<double> baseline;
  std::optional<double> bound;
};

void to_json(nlohmann::json& j, const DistanceReport& r);

/// Exact one-dimensional empirical W1 between equal-size samples.
DistanceReport w1_sorted(std::span<const double> xs, std::span<const double> ys);

/// Exact integral of |F_N - F| against Exp(rate).
DistanceReport w1_vs_exp(std::span<const double> xs, double rate);

/// Exact empirical W1 under the L1 ground cost; rows of xs and ys are points.
DistanceReport w1_matching(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                           std::size_t cap = kDefaultMatchingCap);

/// L1 cost matrix between the rows of xs and ys.
Eigen::MatrixXd l1_cost_matrix(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys);

struct Baseline {
  double mean = 0.0;
  double sd = 0.0;
  int resamples = 0;
};

/// Mean and SD of the self-distance between two independent size-n samples
/// of a one-dimensional target, over B pairs. Pair b uses its own stream
/// derived from one draw of rng, so the result does not depend on threads.
Baseline bootstrap_baseline_1d(const std::function<double(Stream&)>& target, std::size_t n, int resamples,
                               Stream& rng, unsigned threads = 1);

/// Same for an r-dimensional target with the matching distance.
Baseline bootstrap_baseline_mv(const std::function<Eigen::VectorXd(Stream&)>& target, int r, std::size_t n,
                               int resamples, Stream& rng, unsigned threads = 1,
                               std::size_t cap = kDefaultMatchingCap);

/// Mean and SD of a statistic over B resamples (with replacement) of xs.
Baseline bootstrap_resample(std::span<const double> xs,
                            const std::function<double(std::span<const double>)>& statistic, int resamples,
                            Stream& rng, unsigned threads = 1);

}  // namespace brw
