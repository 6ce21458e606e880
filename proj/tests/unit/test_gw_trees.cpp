#include <doctest.h>

#include <cmath>
#include <numeric>

#include "brw/error.hpp"
#include "brw/gw_tree.hpp"

using namespace brw;

namespace {

struct MeanSe {
  double mean, se;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double n = v.size();
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1) / n)};
}

// d/ds f_m(s) by the chain rule.
double iterate_derivative(const OffspringLaw& law, int m, double s) {
  double d = 1.0;
  for (int i = 0; i < m; ++i) {
    double fp = 0;
    for (std::size_t k = 1; k < law.pmf().size(); ++k) fp += k * law.prob(k) * std::pow(s, k - 1.0);
    d *= fp;
    s = law.pgf(s);
  }
  return d;
}

// E[Z_m | Z_n > 0] = (1 - q f_m'(q)) / P(Z_n > 0) with q = q_{n-m}.
double conditioned_mean(const OffspringLaw& law, int n, int m) {
  const double q = law.pgf_iterate(n - m, 0.0);
  return (1.0 - q * iterate_derivative(law, m, q)) / law.survival_exact(n);
}

std::vector<OffspringLaw> builtin_laws() {
  return {OffspringLaw::binary(), OffspringLaw::geometric(), OffspringLaw::poisson()};
}

}  // namespace

TEST_CASE("generation sizes") {
  const auto doubling = OffspringLaw::unchecked({{2, 1.0}});
  Stream rng(1, 1, 1);
  CHECK(simulate_generation_sizes(doubling, 5, rng) == std::vector<std::int64_t>{1, 2, 4, 8, 16, 32});

  const auto law = OffspringLaw::geometric();
  const int n = 50, runs = 1'000'000;
  double sum = 0, sq = 0;
  Stream s(2, 2, 2);
  for (int i = 0; i < runs; ++i) {
    const auto z = simulate_generation_sizes(law, n, s);
    REQUIRE(z[0] == 1);
    sum += z[n];
    sq += double(z[n]) * z[n];
  }
  const double mean = sum / runs, var = sq / runs - mean * mean;
  CHECK(std::abs(mean - 1.0) <= 3 * std::sqrt(n * law.sigma2() / runs));
  CHECK(std::abs(var / (n * law.sigma2()) - 1.0) < 0.05);
}

TEST_CASE("extinct trees stay extinct") {
  const auto law = OffspringLaw::binary();
  Stream rng(3, 3, 3);
  for (int i = 0; i < 1000; ++i) {
    const auto z = simulate_generation_sizes(law, 30, rng);
    bool dead = false;
    for (auto v : z) {
      if (dead) REQUIRE(v == 0);
      dead = dead || v == 0;
    }
  }
}

TEST_CASE("rejection sampler") {
  const auto doubling = OffspringLaw::unchecked({{2, 1.0}});
  Stream rng(4, 4, 4);
  const auto f = sample_conditioned_rejection(doubling, 1, rng);
  CHECK(f.z == std::vector<std::int64_t>{1, 2});
  CHECK(f.attempts == 1);

  const auto law = OffspringLaw::geometric();
  const int n = 20, samples = 20000;
  std::uint64_t attempts = 0;
  for (int i = 0; i < samples; ++i) {
    const auto c = sample_conditioned_rejection(law, n, rng);
    REQUIRE(validate_forest(c).empty());
    REQUIRE(c.spine[n] == 0);
    REQUIRE(left_descendants_at_horizon(c) == 0);
    attempts += c.attempts;
  }
  const double p = law.survival_exact(n);
  const double phat = samples / double(attempts);
  CHECK(std::abs(phat - p) <= 3 * p * std::sqrt((1 - p) / samples));

  CHECK_THROWS_AS(sample_conditioned_rejection(law, 200, rng, 1), Error);
  try {
    Stream r2(9, 9, 9);
    for (int i = 0; i < 100; ++i) sample_conditioned_rejection(law, 200, r2, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::retry_budget_exceeded);
  }
}

TEST_CASE("conditioned mean of Z_n for geometric offspring") {
  const auto law = OffspringLaw::geometric();
  const int n = 50, samples = 10000;
  std::vector<double> rej, spine, pruned;
  SpineSampler full(law, n), pr(law, n, {.keep_left = false, .prune = true});
  for (int i = 0; i < samples; ++i) {
    Stream a(5, 1, i), b(5, 2, i), c(5, 3, i);
    rej.push_back(sample_conditioned_rejection(law, n, a).z_n());
    spine.push_back(full.sample(b).z_n());
    pruned.push_back(pr.sample(c).z_n());
  }
  for (const auto& v : {rej, spine, pruned}) {
    const auto m = mean_se(v);
    CHECK(std::abs(m.mean - (n + 1)) <= 3 * m.se);
  }
}

TEST_CASE("spine sampler invariants across laws and modes") {
  for (const auto& law : builtin_laws()) {
    CAPTURE(law.name());
    for (int n : {1, 2, 7, 40}) {
      for (int mode = 0; mode < 3; ++mode) {
        SpineOptions opt{.keep_left = mode == 1, .prune = mode == 2};
        SpineSampler sampler(law, n, opt);
        for (int i = 0; i < 300; ++i) {
          Stream rng(6, n * 10 + mode, i);
          const auto f = sampler.sample(rng);
          REQUIRE(validate_forest(f) == "");
          REQUIRE(f.z_n() >= 1);
          REQUIRE(left_descendants_at_horizon(f) == 0);
          if (!opt.keep_left) REQUIRE(f.spine[n] == 0);
        }
      }
    }
  }
}

TEST_CASE("intermediate generations match the generating-function oracle") {
  const auto law = OffspringLaw::binary();
  const int n = 30, m = 15, samples = 20000;
  SpineSampler keep(law, n, {.keep_left = true}), pr(law, n, {.prune = true});
  std::vector<double> full_zm, reduced_zm;
  for (int i = 0; i < samples; ++i) {
    Stream a(7, 1, i), b(7, 2, i);
    full_zm.push_back(keep.sample(a).z[m]);
    reduced_zm.push_back(pr.sample(b).z[m]);
  }
  const auto f = mean_se(full_zm);
  CHECK(std::abs(f.mean - conditioned_mean(law, n, m)) <= 3 * f.se);
  const double qnm = law.pgf_iterate(n - m, 0.0);
  const auto r = mean_se(reduced_zm);
  CHECK(std::abs(r.mean - (1 - qnm) / law.survival_exact(n)) <= 3 * r.se);
}

TEST_CASE("block acceptance probability") {
  const auto law = OffspringLaw::geometric();
  const int n = 60, samples = 20000;
  SpineSampler sampler(law, n);
  std::uint64_t attempts = 0;
  for (int i = 0; i < samples; ++i) {
    Stream rng(8, 8, i);
    attempts += sampler.sample(rng).block_attempts[1];
  }
  const double p = sampler.block_acceptance(1);
  const double phat = samples / double(attempts);
  CHECK(std::abs(phat - p) <= 3 * p * std::sqrt((1 - p) / samples));

  // Finite-sum oracle over (children, spine index).
  const double q = law.pgf_iterate(n - 1, 0.0);
  double oracle = 0;
  for (std::uint32_t c = 1; c <= law.max_offspring(); ++c) {
    for (std::uint32_t i = 1; i <= c; ++i) oracle += c * law.prob(c) / c * std::pow(q, i - 1.0);
  }
  CHECK(p == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(sampler.block_acceptance(n) == doctest::Approx(1.0 - law.prob(0)).epsilon(1e-12));
}

TEST_CASE("reduced offspring law") {
  const auto law = OffspringLaw::poisson();
  SpineSampler s(law, 50, {.prune = true});
  const auto& q = s.extinction();
  for (int k : {1, 2, 10, 50}) {
    const auto w = s.reduced_offspring_pmf(k);
    CHECK(w[0] == 0.0);
    double total = 0, mean = 0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      total += w[j];
      mean += j * w[j];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mean == doctest::Approx((1 - q[k - 1]) / (1 - q[k])).epsilon(1e-10));
  }
  // At remaining depth 1 every child reaches the horizon: S is X given X >= 1.
  const auto w1 = s.reduced_offspring_pmf(1);
  for (std::size_t j = 1; j < w1.size(); ++j) CHECK(w1[j] == doctest::Approx(law.prob(j) / (1 - law.prob(0))));
}

TEST_CASE("immortal law: the spine sampler returns the full binary tree") {
  const auto doubling = OffspringLaw::unchecked({{2, 1.0}});
  for (bool prune : {false, true}) {
    SpineSampler s(doubling, 6, {.keep_left = !prune, .prune = prune});
    Stream rng(10, prune, 0);
    const auto f = s.sample(rng);
    CHECK(f.z == std::vector<std::int64_t>{1, 2, 4, 8, 16, 32, 64});
    CHECK(validate_forest(f).empty());
  }
}

TEST_CASE("block retry budget") {
  // The last block accepts only spine index 1; with a budget of one attempt
  // some sample must fail.
  const auto law = OffspringLaw::geometric();
  SpineSampler s(law, 5, {.block_budget = 1});
  bool thrown = false;
  for (int i = 0; i < 200 && !thrown; ++i) {
    Stream rng(11, 11, i);
    try {
      s.sample(rng);
    } catch (const Error& e) {
      thrown = e.kind() == ErrorKind::retry_budget_exceeded;
    }
  }
  CHECK(thrown);
}

TEST_CASE("ancestor labels") {
  const auto law = OffspringLaw::geometric();
  SpineSampler s(law, 20, {.keep_left = true});
  for (int i = 0; i < 100; ++i) {
    Stream rng(12, 12, i);
    auto f = s.sample(rng);
    label_ancestors(f, 20);
    for (std::size_t k = 0; k < f.ancestor.size(); ++k) REQUIRE(f.ancestor[k] == k);
    label_ancestors(f, 0);
    for (auto a : f.ancestor) REQUIRE(a == 0);
    label_ancestors(f, 10);
    std::vector<std::int64_t> per(f.z[10], 0);
    for (auto a : f.ancestor) ++per[a];
    REQUIRE(std::accumulate(per.begin(), per.end(), std::int64_t{0}) == f.z_n());
    // Left-of-spine particles at m have no horizon descendants.
    for (std::uint32_t a = 0; a < f.spine[10]; ++a) REQUIRE(per[a] == 0);
    REQUIRE(validate_forest(f).empty());
  }
  ConditionedForest f;
  f.horizon = 3;
  CHECK_THROWS_AS(label_ancestors(f, 4), Error);
}
