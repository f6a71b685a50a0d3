#include "doctest.h"

#include "gcopula/copula_em.hpp"
#include "gcopula/evaluation.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace gcopula;

namespace {

EncodedRow point_row(const Eigen::VectorXd& z) {
  EncodedRow r;
  for (Index j = 0; j < z.size(); ++j) {
    r.observed.push_back(j);
    r.intervals.push_back(LatentInterval::point(z(j)));
  }
  return r;
}

Eigen::MatrixXd random_spd(long p, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd b(p, p + 2);
  for (long i = 0; i < p; ++i)
    for (long k = 0; k < p + 2; ++k) b(i, k) = g(rng);
  return b * b.transpose() / static_cast<double>(p + 2);
}

Eigen::MatrixXd permute(const Eigen::MatrixXd& a, const std::vector<Index>& perm) {
  Eigen::MatrixXd out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out(i, j) = a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  return out;
}

DataTable mixed_masked(Index n, std::uint64_t seed, double frac = 0.1) {
  return mask_mcar(sample_gc(n, synth::mixed8(), synth::random_corr(8, seed), seed + 1), frac, seed + 2);
}

}  // namespace

TEST_CASE("estep on a single continuous row") {
  Eigen::VectorXd z(3);
  z << 0.3, -1.2, 2.0;
  const auto e = estep(Eigen::MatrixXd::Identity(3, 3), {point_row(z)});
  CHECK((e.S - z * z.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((e.m - z).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("estep on a single half-line ordinal cell") {
  EncodedRow r;
  r.observed = {0};
  r.intervals = {{0.0, kInf}};
  const auto e = estep(Eigen::MatrixXd::Ones(1, 1), {r});
  const auto q = oracle::truncnorm(0.0, 1.0, 0.0, kInf);
  CHECK(e.S(0, 0) == doctest::Approx(q.mean * q.mean + q.variance).epsilon(1e-10));
  CHECK(e.S(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(e.m(0) == doctest::Approx(0.79788).epsilon(1e-5));
}

TEST_CASE("estep on complete continuous rows is the sample second moment") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  const long n = 50;
  Eigen::MatrixXd z(n, 4);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < 4; ++j) z(i, j) = g(rng);
  std::vector<EncodedRow> rows;
  for (long i = 0; i < n; ++i) rows.push_back(point_row(z.row(i).transpose()));
  const auto e = estep(synth::random_corr(4, 2), rows);
  CHECK((e.S / n - z.transpose() * z / n).cwiseAbs().maxCoeff() < 1e-13);
  // One M-step then gives the correlation of the latent points.
  const Eigen::MatrixXd second = z.transpose() * z / n;
  const Eigen::VectorXd d = second.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd want = d.asDiagonal() * second * d.asDiagonal();
  CHECK((mstep(e.S, n) - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("mstep examples") {
  const Eigen::MatrixXd r = synth::random_corr(4, 3);
  CHECK((mstep(r * 7.0, 7.0) - r).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::MatrixXd s(2, 2);
  s << 4, 2, 2, 4;
  Eigen::MatrixXd want(2, 2);
  want << 1, 0.5, 0.5, 1;
  CHECK((mstep(s, 1.0) - want).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(2, 2) = 0.0;
  try {
    mstep(bad, 1.0);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("column 2") != std::string::npos);
  }
}

TEST_CASE("property: mstep normalizes random covariances") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const long p = 2 + static_cast<long>(rng() % 8);
    const Eigen::MatrixXd s = random_spd(p, rng) * 10.0;
    const Eigen::MatrixXd r = mstep(s, 10.0);
    for (long j = 0; j < p; ++j) CHECK(r(j, j) == 1.0);
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    const Eigen::VectorXd d = (s / 10.0).diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd want = d.asDiagonal() * (s / 10.0) * d.asDiagonal();
    CHECK((r - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mstep projects indefinite input and pins single-level columns") {
  Eigen::MatrixXd s(3, 3);
  s << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  const Eigen::MatrixXd r = mstep(s, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
  CHECK(r.diagonal().isOnes());
  const Eigen::MatrixXd pinned = mstep(synth::random_corr(3, 5) * 2.0, 2.0, {1});
  CHECK(pinned(0, 1) == 0.0);
  CHECK(pinned(2, 1) == 0.0);
  CHECK(pinned(1, 1) == 1.0);
}

TEST_CASE("property: projection output is a correlation matrix") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const long p = 2 + static_cast<long>(rng() % 7);
    Eigen::MatrixXd a(p, p);
    for (long i = 0; i < p; ++i)
      for (long j = 0; j <= i; ++j) a(i, j) = a(j, i) = (i == j) ? 1.0 : u(rng);
    const Eigen::MatrixXd r = project_psd(a, 1e-4);
    CHECK(r.diagonal().isOnes());
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("initial correlation falls back to identity on disjoint columns") {
  std::vector<EncodedRow> rows;
  for (int i = 0; i < 5; ++i) {
    EncodedRow r;
    r.observed = {i % 2};
    r.intervals = {LatentInterval::point(0.1 * i)};
    r.missing = {1 - i % 2};
    rows.push_back(r);
  }
  CHECK(initial_corr(rows, 2).isIdentity());
}

TEST_CASE("independent data gives near-zero correlation") {
  const DataTable t = sample_gc(3000, synth::continuous(4), Eigen::MatrixXd(Eigen::MatrixXd::Identity(4, 4)), 7);
  FitConfig cfg;
  const CopulaModel m = fit_standard(t, cfg);
  CHECK((m.corr - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("two dimensional recovery of rho 0.65 with an ordinal margin") {
  Eigen::MatrixXd s(2, 2);
  s << 1, 0.65, 0.65, 1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DataTable t = mask_mcar(
        sample_gc(5000, {MarginalSpec::continuous(synth::exp_q), MarginalSpec::ordinal_masses({1, 2, 3, 4}, {0.3, 0.3, 0.2, 0.2})},
                  s, 30 + seed),
        0.1, 40 + seed);
    FitConfig cfg;
    const CopulaModel m = fit_standard(t, cfg);
    CHECK(std::abs(m.corr(0, 1) - 0.65) <= 0.05);
    FitConfig mb;
    mb.mode = TrainingMode::minibatch_offline;
    mb.seed = seed;
    const CopulaModel b = fit_copula(t, mb);
    CHECK(std::abs(b.corr(0, 1) - m.corr(0, 1)) <= 0.05);
  }
}

TEST_CASE("mixed trace: change shrinks and the surrogate likelihood climbs") {
  const DataTable t = mixed_masked(2500, 100, 0.2);
  FitConfig cfg;
  cfg.tol = 1e-5;
  cfg.max_iter = 15;
  std::ostringstream log;
  cfg.verbose = &log;
  const CopulaModel m = fit_standard(t, cfg);
  const auto& e = m.trace.entries;
  REQUIRE(e.size() >= 3);
  CHECK(e.back().change < e.front().change);
  CHECK(e.back().loglik > m.trace.initial_loglik);
  CHECK(log.str().rfind("Iteration 1: copula parameter change ", 0) == 0);
  CHECK(log.str().find(", likelihood ") != std::string::npos);
  CHECK(log.str().find("Convergence") != std::string::npos);
}

TEST_CASE("property: an unnormalized EM step never lowers the continuous likelihood") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const long p = 3 + static_cast<long>(rng() % 5);
    const DataTable t = mask_mcar(sample_gc(1500, synth::continuous(p), synth::random_corr(p, rng()), rng()), 0.15, rng());
    FitConfig cfg;
    const CopulaModel m = fit_standard(t, cfg);
    const auto rows = encode_table(m.marginals, t);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(p, p);
    EStepResult e = estep(cov, rows);
    for (int k = 0; k < 8; ++k) {
      cov = e.S / static_cast<double>(e.rows);
      const EStepResult next = estep(cov, rows);
      CHECK(next.loglik / next.rows >= e.loglik / e.rows - 1e-8);
      e = next;
    }
  }
}

TEST_CASE("likelihood trace of the continuous fit at the default tolerance") {
  // The correlation rescaling after each M-step can cost a little
  // likelihood; at tol 0.01 the recorded trace still climbs.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DataTable t = mask_mcar(sample_gc(4000, synth::continuous(8), synth::random_corr(8, seed), seed + 1), 0.1, seed + 2);
    FitConfig cfg;
    const CopulaModel m = fit_standard(t, cfg);
    double prev = m.trace.initial_loglik;
    for (const auto& e : m.trace.entries) {
      CHECK(e.loglik >= prev - 1e-8);
      prev = e.loglik;
    }
  }
}

TEST_CASE("approximate likelihood special cases") {
  CopulaModel one;
  one.corr = Eigen::MatrixXd::Ones(1, 1);
  one.marginals = {Marginal::fit(std::vector<double>{1, 2, 3}, VariableType::continuous())};
  Eigen::VectorXd z(1);
  z << 0.4;
  CHECK(approx_loglik(one, {point_row(z)}) == doctest::Approx(std::log(oracle::density(0.4, 0.0, 1.0))));
  CopulaModel ind;
  ind.corr = Eigen::MatrixXd::Identity(3, 3);
  ind.marginals.assign(3, one.marginals[0]);
  Eigen::VectorXd a(3), b(3);
  a << 0.1, -0.5, 1.0;
  b << 2.0, 0.0, -0.3;
  double want = 0.0;
  for (const auto& v : {a, b})
    for (Index j = 0; j < 3; ++j) want += std::log(oracle::density(v(j), 0.0, 1.0));
  CHECK(approx_loglik(ind, {point_row(a), point_row(b)}) == doctest::Approx(want / 2.0));
}

TEST_CASE("fit is invariant to row order and equivariant to column order") {
  const DataTable t = mask_mcar(sample_gc(800, synth::continuous(8), synth::random_corr(8, 200), 201), 0.1, 202);
  FitConfig cfg;
  const CopulaModel base = fit_standard(t, cfg);
  std::vector<Index> rows(static_cast<std::size_t>(t.n_rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::mt19937_64 rng(9);
  std::shuffle(rows.begin(), rows.end(), rng);
  const CopulaModel shuffled = fit_standard(t.rows(rows), cfg);
  CHECK((shuffled.corr - base.corr).cwiseAbs().maxCoeff() < 1e-10);

  std::vector<Index> perm{3, 0, 7, 5, 1, 6, 2, 4};
  Eigen::MatrixXd x(t.n_rows(), t.n_cols());
  for (Index j = 0; j < 8; ++j) x.col(j) = t.values().col(perm[static_cast<std::size_t>(j)]);
  const CopulaModel swapped = fit_standard(DataTable(x), cfg);
  CHECK((swapped.corr - permute(base.corr, perm)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("column order enters mixed fits only through the sweep order") {
  const DataTable t = mixed_masked(800, 210);
  FitConfig cfg;
  const CopulaModel base = fit_standard(t, cfg);
  std::vector<Index> perm{3, 0, 7, 5, 1, 6, 2, 4};
  Eigen::MatrixXd x(t.n_rows(), t.n_cols());
  for (Index j = 0; j < 8; ++j) x.col(j) = t.values().col(perm[static_cast<std::size_t>(j)]);
  const CopulaModel swapped = fit_standard(DataTable(x), cfg);
  CHECK((swapped.corr - permute(base.corr, perm)).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("worker count does not change the fit beyond rounding") {
  const DataTable t = mixed_masked(900, 300);
  FitConfig one;
  FitConfig four;
  four.n_workers = 4;
  const CopulaModel a = fit_standard(t, one);
  const CopulaModel b = fit_standard(t, four);
  CHECK((a.corr - b.corr).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(fit_standard(t, one).corr == a.corr);
}

TEST_CASE("rows without observations are excluded and reported") {
  DataTable t = mixed_masked(300, 400);
  for (Index j = 0; j < t.n_cols(); ++j) t.set_missing(5, j);
  FitConfig cfg;
  const CopulaModel m = fit_standard(t, cfg);
  CHECK(m.trace.excluded_rows == std::vector<Index>{5});
}

TEST_CASE("configuration errors") {
  const DataTable t = mixed_masked(200, 500);
  FitConfig small;
  small.mode = TrainingMode::minibatch_offline;
  small.batch_size = 5;
  try {
    fit_copula(t, small);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("low-rank") != std::string::npos);
  }
  FitConfig one_step;
  one_step.mode = TrainingMode::minibatch_offline;
  one_step.stepsize = [](int) { return 1.0; };
  CHECK_THROWS_AS(fit_copula(t, one_step), std::invalid_argument);
  FitConfig rising;
  rising.mode = TrainingMode::minibatch_offline;
  rising.stepsize = [](int t) { return 0.1 + 0.01 * t; };
  CHECK_THROWS_AS(fit_copula(t, rising), std::invalid_argument);
  FitConfig tol;
  tol.tol = 0.0;
  CHECK_THROWS_AS(fit_standard(t, tol), std::invalid_argument);
}

TEST_CASE("default step size") {
  const StepSize eta = default_stepsize();
  CHECK(eta(1) == doctest::Approx(5.0 / 6.0));
  CHECK(eta(2) == doctest::Approx(5.0 / 7.0));
}

TEST_CASE("mini-batch bookkeeping") {
  const DataTable t = mixed_masked(1050, 600);
  FitConfig cfg;
  cfg.mode = TrainingMode::minibatch_offline;
  cfg.num_pass = 3;
  const CopulaModel m = fit_copula(t, cfg);
  CHECK(m.trace.batches == 11 * 3);
  CHECK(m.trace.rows_processed == 1050 * 3);
  CHECK(m.corr.diagonal().isOnes());
  cfg.seed = 99;
  CHECK(fit_copula(t, cfg).corr != m.corr);
}
