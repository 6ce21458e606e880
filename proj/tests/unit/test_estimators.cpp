#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brw/error.hpp"
#include "brw/estimators.hpp"

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

}  // namespace

TEST_CASE("full-spectrum mass identity") {
  const auto law = OffspringLaw::geometric();
  const auto b = simulate_occupancy(law, 3, 50, 200, 20000, 1, 1, 1);
  for (auto o : b.overflow_mass) REQUIRE(o == 0);
  for (std::size_t t = 0; t < b.trials(); ++t) {
    std::int64_t mass = 0;
    for (int j = 1; j <= b.r; ++j) mass += j * b.count(t, j);
    REQUIRE(mass == b.z[t]);
  }
  const auto k = estimate_mu(b);
  CHECK(std::abs(k.weighted_sum - 1.0) <= 3 * k.weighted_sum_se);
  for (double x : k.kappa) CHECK(x >= 0.0);
}

TEST_CASE("truncated kappa sums and the variance bound") {
  const auto law = OffspringLaw::binary();
  const int n = 100;
  const auto b = simulate_occupancy(law, 3, n, 5, 20000, 2, 2, 1);
  const auto k = estimate_mu(b);
  CHECK(k.weighted_sum <= 1.0 + 3 * k.weighted_sum_se);
  CHECK(k.survival_used == doctest::Approx(law.survival_exact(n)));
  for (int j = 1; j <= 5; ++j) {
    std::vector<double> sq(b.trials());
    for (std::size_t t = 0; t < b.trials(); ++t) sq[t] = b.survival_factor * std::pow(double(b.count(t, j)), 2);
    const auto m2 = mean_se(sq);
    const double var = m2.mean - k.kappa[j - 1] * k.kappa[j - 1];
    CHECK(var <= 1 + n * law.sigma2() + 3 * m2.se);
  }
}

TEST_CASE("vanishing on extinction: conditioned and unconditioned estimators agree") {
  const auto law = OffspringLaw::binary();
  const int n = 20, r = 2;
  const auto cond = simulate_occupancy(law, 3, n, r, 200000, 3, 1, 1, SamplerKind::pruned_spine);
  const auto unc = simulate_occupancy(law, 3, n, r, 400000, 3, 2, 1, SamplerKind::unconditioned);
  CHECK(unc.survival_factor == 1.0);
  const auto mu = estimate_mu(cond);
  const auto mu_unc = estimate_mu(unc);
  for (int j = 0; j < r; ++j) {
    CHECK(std::abs(mu.kappa[j] - mu_unc.kappa[j]) <= 3 * std::hypot(mu.se[j], mu_unc.se[j]));
  }

  // E[U_j] = 0 over unconditioned trees, with mu from the independent batch.
  for (int j = 1; j <= r; ++j) {
    std::vector<double> u(unc.trials()), z(unc.trials());
    for (std::size_t t = 0; t < unc.trials(); ++t) {
      u[t] = double(unc.count(t, j)) - mu.kappa[j - 1] * unc.z[t];
      z[t] = unc.z[t];
    }
    const auto mu_u = mean_se(u);
    const double se = std::hypot(mu_u.se, mu.se[j - 1] * mean_se(z).mean);
    CHECK(std::abs(mu_u.mean) <= 4 * se);
  }

  const auto a_cond = estimate_A(cond, mu);
  const auto a_unc = estimate_A(unc, mu);
  for (int j = 0; j < r; ++j) {
    for (int k = 0; k < r; ++k) {
      CHECK(a_cond.a_hat(j, k) == a_cond.a_hat(k, j));
      CHECK(std::abs(a_cond.a_hat(j, k) - a_unc.a_hat(j, k)) <= 3 * std::hypot(a_cond.se(j, k), a_unc.se(j, k)));
    }
    CHECK(a_cond.a_hat(j, j) >= -3 * a_cond.se(j, j));
  }
}

TEST_CASE("samplers give the same horizon statistics") {
  const auto law = OffspringLaw::geometric();
  const int n = 30;
  const auto pruned = estimate_mu(simulate_occupancy(law, 3, n, 2, 20000, 4, 1, 1, SamplerKind::pruned_spine));
  const auto spine = estimate_mu(simulate_occupancy(law, 3, n, 2, 20000, 4, 2, 1, SamplerKind::spine));
  const auto rej = estimate_mu(simulate_occupancy(law, 3, n, 2, 20000, 4, 3, 1, SamplerKind::rejection));
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(pruned.kappa[j] - spine.kappa[j]) <= 3 * std::hypot(pruned.se[j], spine.se[j]));
    CHECK(std::abs(pruned.kappa[j] - rej.kappa[j]) <= 3 * std::hypot(pruned.se[j], rej.se[j]));
  }
}

TEST_CASE("mu_n(j) stabilises in n at d = 5") {
  const auto law = OffspringLaw::binary();
  std::vector<KappaEstimate> est;
  for (int n : {50, 100, 200}) est.push_back(estimate_mu(simulate_occupancy(law, 5, n, 2, 40000, 5, n, 1)));
  for (int j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i + 1 < est.size(); ++i) {
      const double inc = std::abs(est[i + 1].kappa[j] - est[i].kappa[j]);
      MESSAGE("j=" << j + 1 << " increment " << inc);
      CHECK(inc <= 3 * std::hypot(est[i + 1].se[j], est[i].se[j]));
    }
  }
}

TEST_CASE("parallel aggregation does not depend on threads or trial order") {
  const auto law = OffspringLaw::binary();
  const auto one = simulate_occupancy(law, 7, 60, 2, 2000, 6, 6, 1);
  const auto four = simulate_occupancy(law, 7, 60, 2, 2000, 6, 6, 4);
  CHECK(one.z == four.z);
  CHECK(one.m == four.m);

  const auto mu = estimate_mu(one);
  const auto a = estimate_A(one, mu);
  const auto f = fourth_moment_ratio(one, mu, a, law.sigma2(), 1);

  OccupancyBatch rev = one;
  std::reverse(rev.z.begin(), rev.z.end());
  for (std::size_t t = 0; t < rev.trials(); ++t) {
    for (int j = 1; j <= 2; ++j) rev.m[t * 2 + (j - 1)] = one.count(one.trials() - 1 - t, j);
  }
  const auto mu_r = estimate_mu(rev);
  const auto a_r = estimate_A(rev, mu_r);
  const auto f_r = fourth_moment_ratio(rev, mu_r, a_r, law.sigma2(), 1);
  CHECK(f_r.fourth == doctest::Approx(f.fourth).epsilon(1e-12));
  CHECK(f_r.ratio == doctest::Approx(f.ratio).epsilon(1e-12));
}

TEST_CASE("centred moments are translation consistent") {
  const auto law = OffspringLaw::geometric();
  const auto b = simulate_occupancy(law, 3, 40, 1, 3000, 7, 7, 1);
  const double mu = 0.8, eps = 0.013;
  for (int p : {1, 2, 4}) {
    double direct = 0;
    for (std::size_t t = 0; t < b.trials(); ++t) {
      const double u = double(b.count(t, 1)) - mu * b.z[t];
      direct += std::pow(u - eps * b.z[t], p);
    }
    direct *= b.survival_factor / b.trials();
    CHECK(centered_moment(b, 1, mu + eps, p) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("sigma tilde") {
  CovarianceEstimate c;
  c.r = 2;
  c.a_hat = Eigen::MatrixXd::Zero(2, 2);
  c.se = Eigen::MatrixXd::Zero(2, 2);
  CHECK(sigma_tilde(c, 1.0).entries.isZero(0));

  c.a_hat << 0.5, 0.1, 0.1, 0.3;
  CHECK((sigma_tilde(c, 2.0).entries - c.a_hat).norm() < 1e-15);

  CovarianceEstimate one;
  one.r = 1;
  one.a_hat = Eigen::MatrixXd::Constant(1, 1, 0.17);
  one.se = Eigen::MatrixXd::Zero(1, 1);
  CHECK(sigma_tilde(one, 3.0).entries(0, 0) == doctest::Approx(1.5 * 0.17));

  c.a_hat << 1, 2, 2, 1;
  CHECK_THROWS_AS(sigma_tilde(c, 1.0), Error);
}

TEST_CASE("ratio estimator agrees with the survival-weighted mean and is tighter") {
  const auto law = OffspringLaw::binary();
  const auto b = simulate_occupancy(law, 5, 100, 2, 20000, 12, 1, 1);
  const auto plain = estimate_mu(b);
  const auto ratio = estimate_mu_ratio(b);
  double ms = 0, zs = 0;
  for (std::size_t t = 0; t < b.trials(); ++t) {
    ms += b.count(t, 1);
    zs += b.z[t];
  }
  CHECK(ratio.kappa[0] == doctest::Approx(ms / zs).epsilon(1e-14));
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(plain.kappa[j] - ratio.kappa[j]) <= 3 * plain.se[j]);
    CHECK(ratio.se[j] < 0.5 * plain.se[j]);
  }
  CHECK(ratio.weighted_sum <= 1.0 + 1e-12);

  OccupancyBatch dead = b;
  std::fill(dead.z.begin(), dead.z.end(), 0);
  CHECK_THROWS_AS(estimate_mu_ratio(dead), Error);
}
