#include "brw/lattice.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <string>

#include "brw/error.hpp"

namespace brw {

namespace {

void check_range(const ConditionedForest& forest) {
  if (forest.horizon > 32767) throw Error(ErrorKind::invalid_argument, "horizon exceeds 16-bit coordinate range");
}

void step_generation(const std::vector<std::uint32_t>& parent, const Cloud& prev, Cloud& next, int d,
                     Stream& rng) {
  const auto ds = static_cast<std::size_t>(d);
  const auto steps = static_cast<std::uint64_t>(2 * d + 1);
  next.d = d;
  next.coords.resize(parent.size() * ds);
  for (std::size_t i = 0; i < parent.size(); ++i) {
    std::memcpy(next.coords.data() + i * ds, prev.coords.data() + parent[i] * ds, ds * sizeof(std::int16_t));
    const auto s = static_cast<int>(rng.below(steps));
    if (s == 0) continue;
    if (s <= d) ++next.coords[i * ds + (s - 1)];
    else --next.coords[i * ds + (s - d - 1)];
  }
}

// Particle indices sorted by site, then by `key`; returns the sort order.
std::vector<std::uint32_t> site_order(const Cloud& cloud, const std::vector<std::uint32_t>* key) {
  std::vector<std::uint32_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), 0u);
  const auto ds = static_cast<std::size_t>(cloud.d);
  const std::int16_t* c = cloud.coords.data();
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    const std::int16_t* pa = c + a * ds;
    const std::int16_t* pb = c + b * ds;
    for (std::size_t k = 0; k < ds; ++k) {
      if (pa[k] != pb[k]) return pa[k] < pb[k];
    }
    if (key) return (*key)[a] < (*key)[b];
    return a < b;
  });
  return idx;
}

bool same_site(const Cloud& cloud, std::uint32_t a, std::uint32_t b) {
  const auto ds = static_cast<std::size_t>(cloud.d);
  return std::memcmp(cloud.coords.data() + a * ds, cloud.coords.data() + b * ds, ds * sizeof(std::int16_t)) == 0;
}

void require_labels(const ConditionedForest& forest, const Cloud& horizon) {
  if (!forest.label_generation || forest.ancestor.size() != horizon.size()) {
    throw Error(ErrorKind::missing_labels, "generation-m ancestor labels are not attached");
  }
}

}  // namespace

LatticeConfig::LatticeConfig(int d) : d_(d) {
  if (d < 1) throw Error(ErrorKind::invalid_argument, "dimension must be at least 1");
}

std::vector<int> LatticeConfig::step(int s) const {
  std::vector<int> v(static_cast<std::size_t>(d_), 0);
  if (s >= 1 && s <= d_) v[s - 1] = 1;
  else if (s > d_ && s <= 2 * d_) v[s - d_ - 1] = -1;
  return v;
}

std::vector<Cloud> embed(const ConditionedForest& forest, const LatticeConfig& cfg, Stream& rng) {
  check_range(forest);
  const int d = cfg.d();
  std::vector<Cloud> out(forest.parent.size());
  out[0].d = d;
  out[0].coords.assign(static_cast<std::size_t>(d), 0);
  for (std::size_t g = 1; g < forest.parent.size(); ++g) step_generation(forest.parent[g], out[g - 1], out[g], d, rng);
  return out;
}

Cloud embed_horizon(const ConditionedForest& forest, const LatticeConfig& cfg, Stream& rng) {
  check_range(forest);
  const int d = cfg.d();
  Cloud cur, next;
  cur.d = d;
  cur.coords.assign(static_cast<std::size_t>(d), 0);
  for (std::size_t g = 1; g < forest.parent.size(); ++g) {
    step_generation(forest.parent[g], cur, next, d, rng);
    cur.coords.swap(next.coords);
  }
  return cur;
}

OccupancySpectrum occupancy_spectrum(const Cloud& cloud, int r) {
  if (r < 1) throw Error(ErrorKind::invalid_argument, "truncation level must be at least 1");
  OccupancySpectrum s;
  s.r = r;
  s.m.assign(static_cast<std::size_t>(r), 0);
  s.z_n = static_cast<std::int64_t>(cloud.size());
  const auto idx = site_order(cloud, nullptr);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t k = i + 1;
    while (k < idx.size() && same_site(cloud, idx[i], idx[k])) ++k;
    const auto mult = static_cast<std::int64_t>(k - i);
    s.max_multiplicity = std::max(s.max_multiplicity, mult);
    if (mult <= r) ++s.m[mult - 1];
    else {
      ++s.overflow_sites;
      s.overflow_mass += mult;
    }
    i = k;
  }
  return s;
}

std::int64_t shared_site_count(const ConditionedForest& forest, const Cloud& horizon) {
  require_labels(forest, horizon);
  const auto idx = site_order(horizon, &forest.ancestor);
  std::int64_t shared = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t k = i + 1;
    while (k < idx.size() && same_site(horizon, idx[i], idx[k])) ++k;
    // Sorted by ancestor within the site: distinct labels iff first != last.
    if (forest.ancestor[idx[i]] != forest.ancestor[idx[k - 1]]) shared += static_cast<std::int64_t>(k - i);
    i = k;
  }
  return shared;
}

BlockCounts block_counts(const ConditionedForest& forest, const Cloud& horizon, int r) {
  require_labels(forest, horizon);
  if (r < 1) throw Error(ErrorKind::invalid_argument, "truncation level must be at least 1");
  BlockCounts b;
  b.r = r;
  b.total.assign(static_cast<std::size_t>(r), 0);
  b.block_sum.assign(static_cast<std::size_t>(r), 0);
  b.spine_term.assign(static_cast<std::size_t>(r), 0);
  const std::uint32_t spine_anc = forest.conditioned() ? forest.spine[*forest.label_generation] : kNoParent;

  const auto& anc = forest.ancestor;
  std::vector<std::uint32_t> seen(anc);
  std::sort(seen.begin(), seen.end());
  b.ancestors = std::unique(seen.begin(), seen.end()) - seen.begin();

  const auto idx = site_order(horizon, &anc);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t k = i + 1;
    while (k < idx.size() && same_site(horizon, idx[i], idx[k])) ++k;
    const auto mult = static_cast<std::int64_t>(k - i);
    if (mult <= r) ++b.total[mult - 1];
    std::size_t a = i;
    while (a < k) {
      std::size_t e = a + 1;
      while (e < k && anc[idx[e]] == anc[idx[a]]) ++e;
      const auto sub = static_cast<std::int64_t>(e - a);
      if (sub <= r) {
        ++b.block_sum[sub - 1];
        if (anc[idx[a]] == spine_anc) ++b.spine_term[sub - 1];
      }
      a = e;
    }
    i = k;
  }
  return b;
}

std::int64_t spine_block_sum_gap(const ConditionedForest& forest, const Cloud& horizon, int j,
                                 GapConvention convention, std::int64_t copy_count) {
  if (j < 1) throw Error(ErrorKind::invalid_argument, "multiplicity must be at least 1");
  const BlockCounts b = block_counts(forest, horizon, j);
  std::int64_t sum = b.block_sum[j - 1];
  if (convention == GapConvention::independent_copy) sum += copy_count - b.spine_term[j - 1];
  const std::int64_t diff = b.total[j - 1] - sum;
  return diff < 0 ? -diff : diff;
}

}  // namespace brw
