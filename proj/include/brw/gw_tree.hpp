#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "brw/offspring_law.hpp"
#include "brw/rng.hpp"

namespace brw {

inline constexpr std::uint32_t kNoParent = 0xffffffffu;

/// Generation-by-generation particle state of a Galton-Watson tree.
///
/// parent[g][i] is the index in generation g-1 of particle i of generation g,
/// and particles of every generation are stored in planar (left to right)
/// order. For conditioned samples spine[g] is the index of the spine particle
/// in generation g; particles with a smaller index are left of the spine.
struct ConditionedForest {
  int horizon = 0;
  std::vector<std::vector<std::uint32_t>> parent;
  std::vector<std::uint32_t> spine;
  std::vector<std::int64_t> z;

  /// Generation-m ancestor index of every generation-n particle.
  std::optional<int> label_generation;
  std::vector<std::uint32_t> ancestor;

  /// True when only particles with generation-n descendants are stored.
  bool pruned = false;
  /// True when the particles left of the spine are stored.
  bool keep_left = true;
  /// Whole-tree attempts used by the rejection sampler.
  std::uint64_t attempts = 1;
  /// Attempts used per spine block, indexed by block j = 1..n (entry 0 unused).
  std::vector<std::uint64_t> block_attempts;

  bool conditioned() const noexcept { return !spine.empty(); }
  std::int64_t z_n() const noexcept { return z.empty() ? 0 : z.back(); }
};

/// Z_0..Z_n of an unconditioned process; sizes stay 0 after extinction.
std::vector<std::int64_t> simulate_generation_sizes(const OffspringLaw& law, int n, Stream& rng);

/// Full unconditioned tree to generation n (possibly extinct, no spine).
ConditionedForest simulate_tree(const OffspringLaw& law, int n, Stream& rng);

/// Rejection oracle: first unconditioned tree with Z_n > 0, spine on the
/// ancestral line of the leftmost generation-n particle. max_attempts = 0
/// picks a budget from survival_exact.
ConditionedForest sample_conditioned_rejection(const OffspringLaw& law, int n, Stream& rng,
                                               std::uint64_t max_attempts = 0);

std::uint64_t default_rejection_budget(const OffspringLaw& law, int n);

struct SpineOptions {
  bool keep_left = false;
  /// Sample only particles that have generation-n descendants.
  bool prune = false;
  std::uint64_t block_budget = 1'000'000;
};

/// Spine (size-biased block) sampler of the tree conditioned on Z_n > 0.
/// Holds the precomputed extinction table and, in prune mode, the reduced
/// offspring tables; immutable and shareable between threads.
class SpineSampler {
 public:
  SpineSampler(const OffspringLaw& law, int n, SpineOptions options = {});

  ConditionedForest sample(Stream& rng) const;

  int horizon() const noexcept { return n_; }
  const SpineOptions& options() const noexcept { return options_; }
  /// q_k = P(Z_k = 0) for k = 0..n.
  const std::vector<double>& extinction() const noexcept { return q_; }
  /// Exact acceptance probability of block j by finite summation over
  /// (children_total, spine_index).
  double block_acceptance(int j) const;
  /// Law of the number of children with generation-n descendants of a
  /// non-spine particle that has remaining depth k and survives (k >= 1).
  std::vector<double> reduced_offspring_pmf(int k) const;

 private:
  ConditionedForest sample_full(Stream& rng) const;
  ConditionedForest sample_pruned(Stream& rng) const;

  const OffspringLaw* law_;
  int n_;
  SpineOptions options_;
  SizeBiasedLaw biased_;
  std::vector<double> q_;
  std::vector<AliasTable> reduced_;
};

ConditionedForest sample_conditioned_spine(const OffspringLaw& law, int n, Stream& rng,
                                           bool keep_left = false);

/// Attaches the generation-m ancestor index to every generation-n particle.
void label_ancestors(ConditionedForest& forest, int m);

/// Checks the structural invariants (sizes, parents, spine line, Z_n >= 1 for
/// conditioned forests, planar parent order). Returns an empty string when
/// all hold, else a description of the first violation.
std::string validate_forest(const ConditionedForest& forest);

/// Number of generation-n descendants of particles left of the spine, at
/// every generation. Zero for a valid conditioned forest.
std::int64_t left_descendants_at_horizon(const ConditionedForest& forest);

}  // namespace brw
