#include "brw/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brw/assignment.hpp"
#include "brw/error.hpp"
#include "brw/parallel.hpp"

namespace brw {

namespace {

Baseline summarize(const std::vector<double>& v) {
  Baseline b;
  b.resamples = static_cast<int>(v.size());
  if (v.empty()) return b;
  double sum = 0.0;
  for (double x : v) sum += x;
  b.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - b.mean) * (x - b.mean);
    b.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return b;
}

constexpr std::uint64_t kBaselineLabel = 0x62617365ull;

// Integral over [a, b] of (c - F(t)) for F the Exp(rate) CDF.
double signed_piece(double c, double a, double b, double rate) {
  if (b <= a) return 0.0;
  return (c - 1.0) * (b - a) - std::exp(-rate * a) * std::expm1(-rate * (b - a)) / rate;
}

}  // namespace

void to_json(nlohmann::json& j, const DistanceReport& r) {
  j = nlohmann::json{{"value", r.value}, {"se", r.se}, {"n", r.n}, {"metric", "W1-L1"}};
  j["baseline"] = r.baseline ? nlohmann::json(*r.baseline) : nlohmann::json(nullptr);
  j["bound"] = r.bound ? nlohmann::json(*r.bound) : nlohmann::json(nullptr);
}

DistanceReport w1_sorted(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw Error(ErrorKind::size_mismatch, "samples have sizes " + std::to_string(xs.size()) + " and " +
                                              std::to_string(ys.size()));
  }
  std::vector<double> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  DistanceReport r;
  r.value = acc / static_cast<double>(a.size());
  r.n = a.size();
  return r;
}

DistanceReport w1_vs_exp(std::span<const double> xs, double rate) {
  if (!(rate > 0.0)) throw Error(ErrorKind::invalid_argument, "rate must be positive");
  if (xs.empty()) throw Error(ErrorKind::size_mismatch, "empty sample");
  std::vector<double> s(xs.begin(), xs.end());
  for (double x : s) {
    if (x < 0.0) throw Error(ErrorKind::negative_sample, "sample value " + std::to_string(x) + " is negative");
  }
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  double acc = 0.0;
  double left = 0.0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    const double c = static_cast<double>(i) / n;
    if (i == s.size()) {
      acc += std::exp(-rate * left) / rate;
      break;
    }
    const double right = s[i];
    if (right > left) {
      const double cross = c < 1.0 ? -std::log1p(-c) / rate : INFINITY;
      if (cross <= left) acc -= signed_piece(c, left, right, rate);
      else if (cross >= right) acc += signed_piece(c, left, right, rate);
      else acc += signed_piece(c, left, cross, rate) - signed_piece(c, cross, right, rate);
    }
    left = right;
  }
  DistanceReport r;
  r.value = acc;
  r.n = s.size();
  return r;
}

Eigen::MatrixXd l1_cost_matrix(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys) {
  Eigen::MatrixXd c(xs.rows(), ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    for (Eigen::Index j = 0; j < ys.rows(); ++j) c(i, j) = (xs.row(i) - ys.row(j)).cwiseAbs().sum();
  }
  return c;
}

DistanceReport w1_matching(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, std::size_t cap) {
  if (xs.rows() != ys.rows() || xs.cols() != ys.cols() || xs.rows() == 0) {
    throw Error(ErrorKind::size_mismatch, "samples must have equal, non-zero size and dimension");
  }
  if (static_cast<std::size_t>(xs.rows()) > cap) {
    throw Error(ErrorKind::cap_exceeded,
                "sample size " + std::to_string(xs.rows()) + " exceeds cap " + std::to_string(cap));
  }
  const Assignment a = solve_assignment(l1_cost_matrix(xs, ys));
  DistanceReport r;
  r.value = a.cost / static_cast<double>(xs.rows());
  r.n = static_cast<std::size_t>(xs.rows());
  return r;
}

Baseline bootstrap_baseline_1d(const std::function<double(Stream&)>& target, std::size_t n, int resamples,
                               Stream& rng, unsigned threads) {
  const std::uint64_t seed = rng();
  std::vector<double> dist(static_cast<std::size_t>(std::max(resamples, 0)));
  parallel_for(dist.size(), threads, [&](std::size_t b) {
    Stream s(seed, kBaselineLabel, b);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = target(s);
    for (auto& v : y) v = target(s);
    dist[b] = w1_sorted(x, y).value;
  });
  return summarize(dist);
}

Baseline bootstrap_baseline_mv(const std::function<Eigen::VectorXd(Stream&)>& target, int r, std::size_t n,
                               int resamples, Stream& rng, unsigned threads, std::size_t cap) {
  if (n > cap) throw Error(ErrorKind::cap_exceeded, "baseline sample size exceeds cap");
  const std::uint64_t seed = rng();
  std::vector<double> dist(static_cast<std::size_t>(std::max(resamples, 0)));
  parallel_for(dist.size(), threads, [&](std::size_t b) {
    Stream s(seed, kBaselineLabel, b);
    Eigen::MatrixXd x(n, r), y(n, r);
    for (std::size_t i = 0; i < n; ++i) x.row(i) = target(s).transpose();
    for (std::size_t i = 0; i < n; ++i) y.row(i) = target(s).transpose();
    dist[b] = w1_matching(x, y, cap).value;
  });
  return summarize(dist);
}

Baseline bootstrap_resample(std::span<const double> xs,
                            const std::function<double(std::span<const double>)>& statistic, int resamples,
                            Stream& rng, unsigned threads) {
  const std::uint64_t seed = rng();
  std::vector<double> vals(static_cast<std::size_t>(std::max(resamples, 0)));
  parallel_for(vals.size(), threads, [&](std::size_t b) {
    Stream s(seed, kBaselineLabel + 1, b);
    std::vector<double> re(xs.size());
    for (auto& v : re) v = xs[s.below(xs.size())];
    vals[b] = statistic(re);
  });
  return summarize(vals);
}

}  // namespace brw
