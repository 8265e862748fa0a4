#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>

#include "mvmm/log_pen.hpp"
#include "mvmm/sim.hpp"
#include "support/oracles.hpp"

using namespace mvmm;

TEST(SoftThreshold, Examples) {
  const VectorXd a = (VectorXd(4) << 0.4, 0.35, 0.15, 0.1).finished();
  EXPECT_TRUE(soft_threshold_simplex(a, 0.0).isApprox(a));
  const VectorXd z = soft_threshold_simplex(a, 0.2);
  EXPECT_NEAR(z(0), 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(z(1), 3.0 / 7.0, 1e-15);
  EXPECT_EQ(z(2), 0.0);
  EXPECT_EQ(z(3), 0.0);
  EXPECT_THROW(soft_threshold_simplex(a, 0.25), ContractError);
  EXPECT_THROW(soft_threshold_simplex(a, -0.1), ContractError);
}

TEST(SoftThreshold, IsTheSmallDeltaLimit) {
  const VectorXd two = (VectorXd(2) << 0.7, 0.3).finished();
  const VectorXd z = oracle::log_sparsity_minimizer(two, 0.4, 1e-6);
  EXPECT_LT((z - soft_threshold_simplex(two, 0.4)).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_NEAR(soft_threshold_simplex(two, 0.4)(0), 1.0, 1e-15);

  Rng rng = make_rng(21);
  for (int t = 0; t < 5; ++t) {
    const VectorXd a = oracle::random_simplex(rng, 6, 0.02);
    const double lambda = 0.12;
    const VectorXd z0 = soft_threshold_simplex(a, lambda);
    double prev = 1.0;
    for (double delta : {1e-2, 1e-3, 1e-4, 1e-5}) {
      const double gap = (oracle::log_sparsity_minimizer(a, lambda, delta) - z0).cwiseAbs().maxCoeff();
      EXPECT_LT(gap, 0.5 * prev);
      prev = gap;
    }
    EXPECT_LT(prev, 1e-3);
  }
}

TEST(LogPenalty, UniformTable) {
  const ProbTable u = ProbTable::uniform({3, 4});
  EXPECT_NEAR(log_penalty(u, 1e-3), 12.0 * std::log(1e-3 + 1.0 / 12.0), 1e-12);
}

TEST(PenalizedObjective, ReducesToLogLikelihoodAtZeroLambda) {
  SimConfig c;
  c.design.kind = PiKind::diagonal;
  c.design.k = 3;
  c.dims = {2, 2};
  const MvmmModel m = sim_truth(c, 0);
  const SimData d = sim_train(c, m, 0, 50);
  EXPECT_EQ(penalized_objective(m, d.x, 0.0, 1e-6), log_likelihood(m, d.x));
  const double lam = 0.01, delta = 1e-4;
  EXPECT_NEAR(penalized_objective(m, d.x, lam, delta),
              log_likelihood(m, d.x) - 50.0 * lam * (m.pi.values().array() + delta).log().sum(), 1e-9);
}

TEST(FitLogPen, TinyLambdaFollowsPlainEm) {
  SimConfig c;
  c.design.kind = PiKind::beads;
  c.design.num_blocks = 2;
  c.design.block_size = 2;
  c.dims = {3, 3};
  c.seed = 4;
  const MvmmModel truth = sim_truth(c, 0);
  const SimData d = sim_train(c, truth, 0, 300);
  EmConfig em;
  em.n_init = 1;
  em.max_iter = 30;
  em.rel_tol = 0.0;
  LogPenConfig lc;
  lc.lambda = 1e-300;
  lc.init_iter = 0;
  lc.em = em;
  const MvmmFit lf = fit_log_pen(d.x, {4, 4}, lc);
  const MvmmFit ef = fit_em(d.x, {4, 4}, em);
  EXPECT_LT((lf.model.pi.values() - ef.model.pi.values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitLogPen, LargeLambdaFindsDiagonalSupport) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig c;
    c.design.kind = PiKind::diagonal;
    c.design.k = 4;
    c.sigma_mean = {4.0, 4.0};
    c.dims = {3, 3};
    c.seed = seed;
    const MvmmModel truth = sim_truth(c, 0);
    const SimData d = sim_train(c, truth, 0, 800);
    LogPenConfig lc;
    lc.lambda = 0.95 / 16.0;
    lc.em.seed = seed;
    lc.log_violations = false;
    const MatrixXd p = fit_log_pen(d.x, {4, 4}, lc).model.pi.matrix();
    EXPECT_EQ((p.array() > 0.0).count(), 4) << "seed " << seed;
    EXPECT_EQ(count_blocks(p, 0.0).num_blocks, 4) << "seed " << seed;
  }
}

TEST(FitLogPen, Contracts) {
  const MultiViewData x{MatrixXd::Random(10, 2), MatrixXd::Random(10, 2)};
  LogPenConfig lc;
  lc.lambda = 0.3;
  EXPECT_THROW(fit_log_pen(x, {2, 2}, lc), ContractError);
  lc.lambda = 0.1;
  lc.delta = 0.0;
  EXPECT_THROW(fit_log_pen(x, {2, 2}, lc), ContractError);
}

TEST(LambdaGrid, GeometricAndBelowTheCap) {
  const auto g = lambda_grid({10, 10});
  ASSERT_EQ(g.size(), 20u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-4);
  EXPECT_NEAR(g.back(), 0.0099, 1e-15);
  for (std::size_t i = 2; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
}
