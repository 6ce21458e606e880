#include "brw/gw_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "brw/error.hpp"

namespace brw {

namespace {

void require_horizon(int n, int min_n) {
  if (n < min_n) throw Error(ErrorKind::invalid_argument, "horizon must be at least " + std::to_string(min_n));
}

void fill_sizes(ConditionedForest& f) {
  f.z.resize(f.parent.size());
  for (std::size_t g = 0; g < f.parent.size(); ++g) f.z[g] = static_cast<std::int64_t>(f.parent[g].size());
}

}  // namespace

std::vector<std::int64_t> simulate_generation_sizes(const OffspringLaw& law, int n, Stream& rng) {
  require_horizon(n, 0);
  std::vector<std::int64_t> z(static_cast<std::size_t>(n) + 1, 0);
  z[0] = 1;
  for (int g = 1; g <= n; ++g) {
    std::int64_t next = 0;
    for (std::int64_t i = 0; i < z[g - 1]; ++i) next += law.sample(rng);
    z[g] = next;
    if (next == 0) break;
  }
  return z;
}

ConditionedForest simulate_tree(const OffspringLaw& law, int n, Stream& rng) {
  require_horizon(n, 0);
  ConditionedForest f;
  f.horizon = n;
  f.parent.resize(static_cast<std::size_t>(n) + 1);
  f.parent[0] = {kNoParent};
  for (int g = 1; g <= n; ++g) {
    const auto& prev = f.parent[g - 1];
    auto& cur = f.parent[g];
    for (std::uint32_t i = 0; i < prev.size(); ++i) {
      const std::uint32_t c = law.sample(rng);
      cur.insert(cur.end(), c, i);
    }
  }
  fill_sizes(f);
  return f;
}

std::uint64_t default_rejection_budget(const OffspringLaw& law, int n) {
  const double s = law.survival_exact(n);
  if (s <= 0.0) return 1000;
  return std::max<std::uint64_t>(1000, static_cast<std::uint64_t>(std::ceil(50.0 / s)));
}

ConditionedForest sample_conditioned_rejection(const OffspringLaw& law, int n, Stream& rng,
                                               std::uint64_t max_attempts) {
  require_horizon(n, 1);
  if (max_attempts == 0) max_attempts = default_rejection_budget(law, n);
  for (std::uint64_t attempt = 1; attempt <= max_attempts; ++attempt) {
    ConditionedForest f = simulate_tree(law, n, rng);
    if (f.z_n() == 0) continue;
    f.attempts = attempt;
    f.spine.assign(static_cast<std::size_t>(n) + 1, 0);
    std::uint32_t idx = 0;
    for (int g = n; g >= 1; --g) {
      f.spine[g] = idx;
      idx = f.parent[g][idx];
    }
    f.spine[0] = 0;
    return f;
  }
  throw Error(ErrorKind::retry_budget_exceeded,
              "no surviving tree in " + std::to_string(max_attempts) + " attempts at n=" + std::to_string(n));
}

SpineSampler::SpineSampler(const OffspringLaw& law, int n, SpineOptions options)
    : law_(&law), n_(n), options_(options), biased_(law), q_(law.extinction_probabilities(n)) {
  require_horizon(n, 1);
  if (options_.block_budget == 0) throw Error(ErrorKind::invalid_argument, "block budget must be positive");
  if (options_.prune) {
    reduced_.reserve(static_cast<std::size_t>(n) + 1);
    reduced_.emplace_back();
    for (int k = 1; k <= n; ++k) {
      const auto w = reduced_offspring_pmf(k);
      reduced_.emplace_back(w);
    }
  }
}

double SpineSampler::block_acceptance(int j) const {
  if (j < 1 || j > n_) throw Error(ErrorKind::invalid_argument, "block index out of range");
  const double q = q_[n_ - j];
  const auto ps = biased_.pmf();
  double acc = 0.0;
  for (std::size_t c = 1; c < ps.size(); ++c) {
    if (ps[c] == 0.0) continue;
    double geo = 0.0, term = 1.0;
    for (std::size_t i = 0; i < c; ++i) {
      geo += term;
      term *= q;
    }
    acc += ps[c] * geo / static_cast<double>(c);
  }
  return acc;
}

std::vector<double> SpineSampler::reduced_offspring_pmf(int k) const {
  if (k < 1 || k > n_) throw Error(ErrorKind::invalid_argument, "remaining depth out of range");
  const auto p = law_->pmf();
  const double a = 1.0 - q_[k - 1];
  const double b = q_[k - 1];
  const double la = std::log(a);
  const double lb = b > 0.0 ? std::log(b) : 0.0;
  std::vector<double> w(p.size(), 0.0);
  for (std::size_t s = 1; s < p.size(); ++s) {
    double acc = 0.0;
    for (std::size_t c = s; c < p.size(); ++c) {
      if (p[c] == 0.0) continue;
      if (c > s && b == 0.0) continue;
      const double lc = std::lgamma(c + 1.0) - std::lgamma(s + 1.0) - std::lgamma(c - s + 1.0);
      const double lt = lc + static_cast<double>(s) * la + (c > s ? static_cast<double>(c - s) * lb : 0.0);
      acc += p[c] * std::exp(lt);
    }
    w[s] = acc;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

ConditionedForest SpineSampler::sample(Stream& rng) const {
  return options_.prune ? sample_pruned(rng) : sample_full(rng);
}

ConditionedForest SpineSampler::sample_full(Stream& rng) const {
  const OffspringLaw& law = *law_;
  const bool keep_left = options_.keep_left;
  ConditionedForest f;
  f.horizon = n_;
  f.keep_left = keep_left;
  f.parent.resize(static_cast<std::size_t>(n_) + 1);
  f.parent[0] = {kNoParent};
  f.spine.assign(static_cast<std::size_t>(n_) + 1, 0);
  f.block_attempts.assign(static_cast<std::size_t>(n_) + 1, 0);

  // Offspring counts of retained left subtrees in breadth-first order; a
  // particle tagged t >= 0 replays the next count of subtree t.
  std::vector<std::vector<std::uint32_t>> replay;
  std::vector<std::size_t> cursor;
  std::vector<std::int32_t> tag{-1}, next_tag;
  std::vector<std::uint32_t> scratch;

  for (int g = 1; g <= n_; ++g) {
    const int depth = n_ - g;
    std::uint32_t children = 0, spine_index = 0;
    std::uint64_t attempt = 0;
    std::size_t block_start = replay.size();
    for (;;) {
      if (++attempt > options_.block_budget) {
        throw Error(ErrorKind::retry_budget_exceeded,
                    "spine block " + std::to_string(g) + " not accepted in " +
                        std::to_string(options_.block_budget) + " attempts");
      }
      children = biased_.sample(rng);
      spine_index = 1 + static_cast<std::uint32_t>(rng.below(children));
      replay.resize(block_start);
      bool ok = true;
      for (std::uint32_t s = 1; s < spine_index && ok; ++s) {
        scratch.clear();
        std::int64_t cur = 1;
        for (int level = 0; level < depth && cur > 0; ++level) {
          std::int64_t next = 0;
          for (std::int64_t i = 0; i < cur; ++i) {
            const std::uint32_t c = law.sample(rng);
            if (keep_left) scratch.push_back(c);
            next += c;
          }
          cur = next;
        }
        if (cur != 0) ok = false;
        else if (keep_left) replay.push_back(scratch);
      }
      if (ok) break;
    }
    f.block_attempts[g] = attempt;
    cursor.resize(replay.size(), 0);

    const auto& prev = f.parent[g - 1];
    auto& cur = f.parent[g];
    next_tag.clear();
    for (std::uint32_t i = 0; i < prev.size(); ++i) {
      if (i == f.spine[g - 1]) {
        if (keep_left) {
          for (std::uint32_t s = 1; s < spine_index; ++s) {
            cur.push_back(i);
            next_tag.push_back(static_cast<std::int32_t>(block_start + s - 1));
          }
        }
        f.spine[g] = static_cast<std::uint32_t>(cur.size());
        cur.insert(cur.end(), children - spine_index + 1, i);
        next_tag.insert(next_tag.end(), children - spine_index + 1, -1);
        continue;
      }
      const std::int32_t t = tag[i];
      const std::uint32_t c = t < 0 ? law.sample(rng) : replay[t][cursor[t]++];
      cur.insert(cur.end(), c, i);
      next_tag.insert(next_tag.end(), c, t);
    }
    tag.swap(next_tag);
  }
  fill_sizes(f);
  return f;
}

ConditionedForest SpineSampler::sample_pruned(Stream& rng) const {
  ConditionedForest f;
  f.horizon = n_;
  f.pruned = true;
  f.keep_left = false;
  f.parent.resize(static_cast<std::size_t>(n_) + 1);
  f.parent[0] = {kNoParent};
  f.spine.assign(static_cast<std::size_t>(n_) + 1, 0);
  f.block_attempts.assign(static_cast<std::size_t>(n_) + 1, 0);

  for (int g = 1; g <= n_; ++g) {
    const int depth = n_ - g;
    const double q = q_[depth];
    const double keep = 1.0 - q;
    std::uint32_t children = 0, spine_index = 0;
    std::uint64_t attempt = 0;
    for (;;) {
      if (++attempt > options_.block_budget) {
        throw Error(ErrorKind::retry_budget_exceeded,
                    "spine block " + std::to_string(g) + " not accepted in " +
                        std::to_string(options_.block_budget) + " attempts");
      }
      children = biased_.sample(rng);
      spine_index = 1 + static_cast<std::uint32_t>(rng.below(children));
      if (spine_index == 1 || rng.bernoulli(std::pow(q, spine_index - 1))) break;
    }
    f.block_attempts[g] = attempt;

    const auto& prev = f.parent[g - 1];
    auto& cur = f.parent[g];
    const AliasTable& reduced = reduced_[depth + 1];
    for (std::uint32_t i = 0; i < prev.size(); ++i) {
      if (i == f.spine[g - 1]) {
        f.spine[g] = static_cast<std::uint32_t>(cur.size());
        cur.push_back(i);
        for (std::uint32_t s = spine_index; s < children; ++s) {
          if (keep >= 1.0 || rng.bernoulli(keep)) cur.push_back(i);
        }
        continue;
      }
      const std::uint32_t c = reduced.sample(rng);
      cur.insert(cur.end(), c, i);
    }
  }
  fill_sizes(f);
  return f;
}

ConditionedForest sample_conditioned_spine(const OffspringLaw& law, int n, Stream& rng, bool keep_left) {
  SpineOptions opt;
  opt.keep_left = keep_left;
  return SpineSampler(law, n, opt).sample(rng);
}

void label_ancestors(ConditionedForest& forest, int m) {
  const int n = forest.horizon;
  if (m < 0 || m > n) throw Error(ErrorKind::invalid_argument, "label generation out of range");
  std::vector<std::uint32_t> anc(forest.parent[n].size());
  std::iota(anc.begin(), anc.end(), 0u);
  for (int g = n; g > m; --g) {
    const auto& par = forest.parent[g];
    for (auto& a : anc) a = par[a];
  }
  forest.ancestor = std::move(anc);
  forest.label_generation = m;
}

std::string validate_forest(const ConditionedForest& f) {
  std::ostringstream os;
  const auto gens = static_cast<std::size_t>(f.horizon) + 1;
  if (f.parent.size() != gens || f.z.size() != gens) return "generation count does not match horizon";
  if (f.z[0] != 1 || f.parent[0].size() != 1) return "Z_0 != 1";
  for (std::size_t g = 1; g < gens; ++g) {
    const auto& par = f.parent[g];
    if (static_cast<std::int64_t>(par.size()) != f.z[g]) {
      os << "Z_" << g << " does not match the particle list";
      return os.str();
    }
    for (std::size_t i = 0; i < par.size(); ++i) {
      if (par[i] >= f.parent[g - 1].size() || (i > 0 && par[i] < par[i - 1])) {
        os << "bad parent order at generation " << g;
        return os.str();
      }
    }
    if (f.pruned && g < gens) {
      std::vector<char> has_child(f.parent[g - 1].size(), 0);
      for (auto p : par) has_child[p] = 1;
      if (std::find(has_child.begin(), has_child.end(), 0) != has_child.end()) {
        os << "pruned forest has a childless particle at generation " << g - 1;
        return os.str();
      }
    }
  }
  if (f.conditioned()) {
    if (f.spine.size() != gens) return "spine length does not match horizon";
    if (f.spine[0] != 0) return "spine does not start at the root";
    for (std::size_t g = 1; g < gens; ++g) {
      if (f.spine[g] >= f.parent[g].size()) {
        os << "no spine particle at generation " << g;
        return os.str();
      }
      if (f.parent[g][f.spine[g]] != f.spine[g - 1]) {
        os << "spine broken at generation " << g;
        return os.str();
      }
    }
    if (f.z_n() < 1) return "conditioned forest has Z_n = 0";
  }
  if (f.label_generation) {
    if (f.ancestor.size() != f.parent.back().size()) return "ancestor labels do not cover generation n";
  }
  return {};
}

std::int64_t left_descendants_at_horizon(const ConditionedForest& f) {
  if (!f.conditioned()) return 0;
  std::vector<char> left{0}, next;
  for (int g = 1; g <= f.horizon; ++g) {
    const auto& par = f.parent[g];
    next.assign(par.size(), 0);
    for (std::size_t i = 0; i < par.size(); ++i) next[i] = left[par[i]] || i < f.spine[g];
    left.swap(next);
  }
  std::int64_t count = 0;
  for (char c : left) count += c;
  return count;
}

}  // namespace brw
