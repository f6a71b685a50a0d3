#include "doctest.h"

#include "gcopula/normal.hpp"
#include "gcopula/posterior.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <cmath>
#include <random>

using namespace gcopula;

namespace {

// Random row: each coordinate is a point, an interval or missing, with at
// least one observed coordinate.
EncodedRow random_row(long p, std::mt19937_64& rng, bool points_only) {
  std::normal_distribution<double> g(0.0, 1.0);
  EncodedRow row;
  for (long j = 0; j < p; ++j) {
    const auto kind = rng() % 3;
    if (kind == 0 && !(j == p - 1 && row.observed.empty())) {
      row.missing.push_back(j);
    } else if (kind == 1 || points_only) {
      row.observed.push_back(j);
      row.intervals.push_back(LatentInterval::point(g(rng)));
    } else {
      const double a = g(rng);
      row.observed.push_back(j);
      switch (rng() % 3) {
        case 0: row.intervals.push_back({a, kInf}); break;
        case 1: row.intervals.push_back({-kInf, a}); break;
        default: row.intervals.push_back({a, a + 0.2 + std::abs(g(rng))}); break;
      }
    }
  }
  return row;
}

}  // namespace

TEST_CASE("standard normal cdf and quantile") {
  CHECK(std_normal_cdf(0.0) == 0.5);
  CHECK(std_normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
  for (int k = 1; k <= 99; ++k) {
    const double p = k / 100.0;
    CHECK(std::abs(std_normal_cdf(std_normal_quantile(p)) - p) < 1e-10);
  }
  CHECK(std_normal_cdf(-40.0) >= 0.0);
  CHECK(std_normal_sf(10.0) == doctest::Approx(7.619853024160527e-24).epsilon(1e-10));
  CHECK_THROWS(std_normal_quantile(1.5));
  CHECK_THROWS(std_normal_quantile(-0.1));
}

TEST_CASE("truncated normal examples") {
  const auto whole = truncnorm_moments(0.0, 1.0, LatentInterval::whole());
  CHECK(whole.mean == 0.0);
  CHECK(whole.variance == doctest::Approx(1.0));
  CHECK(whole.mass == doctest::Approx(1.0));
  CHECK(std::abs(truncnorm_moments(0.0, 1.0, {-1.3, 1.3}).mean) < 1e-15);
  const auto half = truncnorm_moments(0.0, 1.0, {0.0, kInf});
  const auto want = oracle::truncnorm(0.0, 1.0, 0.0, kInf);
  CHECK(half.mean == doctest::Approx(want.mean).epsilon(1e-12));
  CHECK(half.variance == doctest::Approx(want.variance).epsilon(1e-12));
  CHECK(half.mean == doctest::Approx(0.7978846).epsilon(1e-7));
  CHECK(half.variance == doctest::Approx(0.3633802).epsilon(1e-7));
  CHECK(half.mass == doctest::Approx(0.5));
}

TEST_CASE("truncated normal far beyond numeric range flags zero mass") {
  const auto far = truncnorm_moments(0.0, 1.0, {1e6, 1e6 + 1.0});
  CHECK(far.zero_mass);
  CHECK(far.mean == doctest::Approx(1e6).epsilon(1e-11));
  CHECK(far.variance < 1e-11);
  const auto left = truncnorm_moments(0.0, 1.0, {-kInf, -1e6});
  CHECK(left.zero_mass);
  CHECK(left.mean == doctest::Approx(-1e6).epsilon(1e-11));
  const auto absurd = truncnorm_moments(0.0, 1.0, {1e300, kInf});
  CHECK(absurd.zero_mass);
  CHECK(absurd.mean == 1e300);
  CHECK(absurd.variance == 0.0);
}

TEST_CASE("property: truncated normal agrees with quadrature and shrinks the variance") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 300; ++c) {
    const double mu = -3.0 + 6.0 * u(rng);
    const double var = 0.1 + 3.0 * u(rng);
    const double sd = std::sqrt(var);
    const double a = -12.0 + 24.0 * u(rng);
    const LatentInterval iv = c % 2 ? LatentInterval{mu + sd * a, kInf} : LatentInterval{mu + sd * a, mu + sd * (a + 0.05 + 3.0 * u(rng))};
    const auto got = truncnorm_moments(mu, var, iv);
    const auto want = oracle::truncnorm(mu, var, iv.lower, iv.upper);
    CHECK(std::abs(got.mean - want.mean) < 1e-9);
    CHECK(std::abs(got.variance - want.variance) < 1e-9);
    CHECK(got.variance >= 0.0);
    CHECK(got.variance <= var);
    CHECK(iv.contains(got.mean));
  }
}

TEST_CASE("conditional normal examples") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd z(1);
  z << 2.5;
  const auto c = conditional_mvn(eye, {1}, z, {0, 2});
  CHECK(c.mean.isZero());
  CHECK(c.cov.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  const auto empty = conditional_mvn(eye, {0, 1, 2}, Eigen::VectorXd::Ones(3), {});
  CHECK(empty.mean.size() == 0);
  CHECK(empty.cov.size() == 0);
}

TEST_CASE("conditional normal matches Monte Carlo for rho 0.65") {
  Eigen::MatrixXd s(2, 2);
  s << 1.0, 0.65, 0.65, 1.0;
  Eigen::VectorXd z(1);
  z << 1.0;
  const auto c = conditional_mvn(s, {0}, z, {1});
  CHECK(c.mean(0) == doctest::Approx(0.65));
  CHECK(c.cov(0, 0) == doctest::Approx(0.5775));
  // Joint draws from the bivariate law, kept when z1 lands within h of 1.
  std::mt19937_64 rng(65);
  std::normal_distribution<double> g(0.0, 1.0);
  const double h = 0.02;
  double sum = 0.0;
  double sq = 0.0;
  long kept = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double z1 = g(rng);
    const double z2 = 0.65 * z1 + std::sqrt(1.0 - 0.65 * 0.65) * g(rng);
    if (std::abs(z1 - 1.0) > h) continue;
    sum += z2;
    sq += z2 * z2;
    ++kept;
  }
  REQUIRE(kept > 5000);
  const double mean = sum / static_cast<double>(kept);
  const double var = sq / static_cast<double>(kept) - mean * mean;
  const double se_mean = std::sqrt(c.cov(0, 0) / static_cast<double>(kept));
  const double se_var = c.cov(0, 0) * std::sqrt(2.0 / static_cast<double>(kept));
  CHECK(std::abs(mean - c.mean(0)) < 3.0 * se_mean);
  CHECK(std::abs(var - c.cov(0, 0)) < 3.0 * se_var);
}

TEST_CASE("property: conditioning matches explicit inverses and reduces variance") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const long p = 2 + static_cast<long>(rng() % 9);
    const Eigen::MatrixXd sigma = synth::random_corr(p, rng(), 2, 0.4);
    EncodedRow row = random_row(p, rng, true);
    Eigen::VectorXd zo(static_cast<long>(row.observed.size()));
    for (std::size_t k = 0; k < row.observed.size(); ++k) zo(static_cast<long>(k)) = row.intervals[k].lower;
    const auto got = conditional_mvn(sigma, row.observed, zo, row.missing);
    const auto want = oracle::mvn_conditional(sigma, row.observed, zo, row.missing);
    if (!row.missing.empty()) {
      CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((got.cov - want.cov).cwiseAbs().maxCoeff() < 1e-10);
      for (long r = 0; r < got.cov.rows(); ++r) CHECK(got.cov(r, r) <= 1.0 + 1e-12);
    }
    const RowPosterior post = row_posterior(sigma, row);
    for (std::size_t k = 0; k < row.observed.size(); ++k) {
      CHECK(post.cond_mean(row.observed[k]) == row.intervals[k].lower);
      CHECK(post.cond_var(row.observed[k]) == 0.0);
    }
  }
}

TEST_CASE("row posterior single ordinal observation") {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  EncodedRow row;
  row.observed = {0};
  row.intervals = {{0.0, kInf}};
  const RowPosterior post = row_posterior(one, row);
  CHECK(post.cond_mean(0) == doctest::Approx(0.7978845608).epsilon(1e-9));
  CHECK(post.cond_var(0) == doctest::Approx(0.3633802276).epsilon(1e-9));
}

TEST_CASE("row posterior with independent ordinal and missing coordinate") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  EncodedRow row;
  row.observed = {0};
  row.intervals = {{-0.5, 0.7}};
  row.missing = {1};
  const RowPosterior post = row_posterior(eye, row);
  CHECK(post.cond_mean(1) == doctest::Approx(0.0));
  CHECK(post.cond_cov_missing(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("property: row posterior is symmetric under negation") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const long p = 2 + static_cast<long>(rng() % 6);
    const Eigen::MatrixXd sigma = synth::random_corr(p, rng(), 2, 0.5);
    const EncodedRow row = random_row(p, rng, false);
    EncodedRow neg = row;
    for (auto& iv : neg.intervals) iv = {-iv.upper, -iv.lower};
    const RowPosterior a = row_posterior(sigma, row);
    const RowPosterior b = row_posterior(sigma, neg);
    CHECK((a.cond_mean + b.cond_mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.cond_var - b.cond_var).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("property: row posterior outputs are valid moments") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 300; ++trial) {
    const long p = 2 + static_cast<long>(rng() % 8);
    const Eigen::MatrixXd sigma = synth::random_corr(p, rng(), 3, 0.3);
    const EncodedRow row = random_row(p, rng, false);
    const RowPosterior post = row_posterior(sigma, row);
    CHECK((post.cond_var.array() >= 0.0).all());
    CHECK(std::isfinite(post.loglik));
    for (std::size_t k = 0; k < row.observed.size(); ++k) {
      CHECK(row.intervals[k].contains(post.cond_mean(row.observed[k])));
    }
    if (!row.missing.empty()) {
      const Eigen::MatrixXd& c = post.cond_cov_missing;
      CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
      CHECK(es.eigenvalues().minCoeff() > -1e-10);
      // The plug-in variance ignores the interval spread.
      CHECK((post.missing_var.array() <= c.diagonal().array() + 1e-12).all());
    }
  }
}

TEST_CASE("truncated sampler moments") {
  Rng rng(9);
  for (const LatentInterval iv : {LatentInterval{0.3, kInf}, LatentInterval{-kInf, -2.0}, LatentInterval{-0.5, 0.1},
                                  LatentInterval{35.0, kInf}}) {
    const int draws = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double x = sample_truncnorm(0.2, 1.5, iv, rng);
      REQUIRE(iv.contains(x));
      sum += x;
      sq += x * x;
    }
    const auto m = truncnorm_moments(0.2, 1.5, iv);
    const double mean = sum / draws;
    CHECK(std::abs(mean - m.mean) < 4.0 * std::sqrt(m.variance / draws) + 1e-12);
    CHECK(sq / draws - mean * mean == doctest::Approx(m.variance).epsilon(0.02));
  }
}

TEST_CASE("draws of the missing block follow the conditional law") {
  Eigen::MatrixXd s(3, 3);
  s << 1.0, 0.5, 0.3, 0.5, 1.0, 0.4, 0.3, 0.4, 1.0;
  EncodedRow row;
  row.observed = {0};
  row.intervals = {LatentInterval::point(0.8)};
  row.missing = {1, 2};
  const RowPosterior post = row_posterior(s, row);
  Rng rng(10);
  const int draws = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
  Eigen::VectorXd zo(1);
  zo << 0.8;
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd z = draw_missing(post, zo, rng);
    sum += z;
    sq += z * z.transpose();
  }
  const Eigen::Vector2d mean = sum / draws;
  const Eigen::Matrix2d cov = sq / draws - mean * mean.transpose();
  CHECK(mean(0) == doctest::Approx(post.cond_mean(1)).epsilon(0.02));
  CHECK(mean(1) == doctest::Approx(post.cond_mean(2)).epsilon(0.03));
  CHECK((cov - post.cond_cov_missing).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("jitter ladder rescues nearly singular blocks and gives up on indefinite ones") {
  Eigen::MatrixXd dup(2, 2);
  dup << 1.0, 1.0, 1.0, 1.0;
  const SpdFactor f = factor_spd(dup);
  CHECK(f.jitter > 0.0);
  CHECK(f.jitter <= 1e-2);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(factor_spd(bad), SingularMatrixError);
}
