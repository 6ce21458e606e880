#pragma once

#include <vector>

namespace oracle {

/// Exact moments of (M_n(j), Z_n) for the unconditioned branching random walk,
/// by summing over every tree of depth n and every choice of walk steps.
struct OccupancyMoments {
  double m = 0.0;
  double z = 0.0;
  double mm = 0.0;
  double mz = 0.0;
  double zz = 0.0;
  double survival = 0.0;

  double mu() const { return m; }
  /// E[(M - mu Z)^2] with mu = E[M].
  double a() const { return mm - 2.0 * m * mz + m * m * zz; }
};

/// pmf[k] = P(k children). Only practical for tiny depths and supports.
OccupancyMoments enumerate_occupancy(const std::vector<double>& pmf, int d, int depth, int j);

}  // namespace oracle
