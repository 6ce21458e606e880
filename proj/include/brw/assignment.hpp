#pragma once

#include <vector>

#include <Eigen/Dense>

namespace brw {

struct Assignment {
  double cost = 0.0;
  /// row i is matched with column match[i].
  std::vector<int> match;
};

/// Minimum-cost perfect matching of a square cost matrix (Hungarian method
/// with potentials, O(N^3)). Exact for integer-valued costs.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// Minimum over all N! permutations; reference for small N.
double brute_force_assignment(const Eigen::MatrixXd& cost);

}  // namespace brw
