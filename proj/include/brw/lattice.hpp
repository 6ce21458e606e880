#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/gw_tree.hpp"
#include "brw/rng.hpp"

namespace brw {

/// Nearest-neighbour step law on Z^d: step 0 stays put, steps 1..d add e_k,
/// steps d+1..2d subtract e_k, each with probability 1/(2d+1).
class LatticeConfig {
 public:
  explicit LatticeConfig(int d);

  int d() const noexcept { return d_; }
  int step_count() const noexcept { return 2 * d_ + 1; }
  /// Displacement of step s as a vector of length d.
  std::vector<int> step(int s) const;

 private:
  int d_;
};

/// Particle positions of one generation, row-major with d int16 coordinates
/// per particle.
struct Cloud {
  int d = 0;
  std::vector<std::int16_t> coords;

  std::size_t size() const noexcept { return d == 0 ? 0 : coords.size() / static_cast<std::size_t>(d); }
  std::span<const std::int16_t> at(std::size_t i) const noexcept {
    return {coords.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
};

/// Positions of every generation 0..n; the root sits at the origin.
std::vector<Cloud> embed(const ConditionedForest& forest, const LatticeConfig& cfg, Stream& rng);

/// Positions of generation n only, computed generation by generation. Uses
/// the same random draws as embed(), so both give the same horizon cloud.
Cloud embed_horizon(const ConditionedForest& forest, const LatticeConfig& cfg, Stream& rng);

struct OccupancySpectrum {
  std::int64_t z_n = 0;
  int r = 0;
  /// m[j - 1] = number of sites holding exactly j particles, j = 1..r.
  std::vector<std::int64_t> m;
  std::int64_t overflow_sites = 0;
  std::int64_t overflow_mass = 0;
  std::int64_t max_multiplicity = 0;

  std::int64_t count(int j) const { return j >= 1 && j <= r ? m[j - 1] : 0; }
};

OccupancySpectrum occupancy_spectrum(const Cloud& cloud, int r);

/// Y_{n;m}: generation-n particles sharing their site with a particle of a
/// different generation-m ancestor. Requires ancestor labels.
std::int64_t shared_site_count(const ConditionedForest& forest, const Cloud& horizon);

enum class GapConvention { in_tree, independent_copy };

/// Multiplicity counts of the ancestor-restricted clouds.
struct BlockCounts {
  int r = 0;
  /// M_n(j), j = 1..r.
  std::vector<std::int64_t> total;
  /// Sum over generation-m ancestors i of M^i_{n,m}(j).
  std::vector<std::int64_t> block_sum;
  /// The term of the spine's generation-m ancestor.
  std::vector<std::int64_t> spine_term;
  std::int64_t ancestors = 0;
};

BlockCounts block_counts(const ConditionedForest& forest, const Cloud& horizon, int r);

/// |M_n(j) - sum_i M^i_{n,m}(j)|. With independent_copy the spine ancestor's
/// term is replaced by copy_count, the multiplicity-j count of an
/// independent unconditioned copy of depth n - m.
std::int64_t spine_block_sum_gap(const ConditionedForest& forest, const Cloud& horizon, int j,
                                 GapConvention convention = GapConvention::in_tree,
                                 std::int64_t copy_count = 0);

}  // namespace brw
