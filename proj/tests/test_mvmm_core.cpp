#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "mvmm/mvmm_core.hpp"
#include "mvmm/sim.hpp"

using namespace mvmm;

namespace {

GaussianDiagComponent comp(double mean, double var, Index d = 1) {
  return {VectorXd::Constant(d, mean), VectorXd::Constant(d, var)};
}

MvmmModel small_model() {
  MvmmModel m;
  m.views.resize(2);
  m.views[0].components = {comp(-2, 1, 2), comp(1, 0.5, 2)};
  m.views[1].components = {comp(0, 1), comp(3, 2), comp(-3, 1)};
  MatrixXd p(2, 3);
  p << 0.3, 0.1, 0.05, 0.0, 0.25, 0.3;
  m.pi = ProbTable::from_matrix(p);
  return m;
}

MultiViewData small_data(Index n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_dataset(small_model(), n, rng).x;
}

// log f(x_i) by direct double summation, no log-sum-exp
double naive_log_lik(const MvmmModel& m, const MultiViewData& x) {
  double s = 0.0;
  for (Index i = 0; i < x[0].rows(); ++i) {
    double f = 0.0;
    for (Index t = 0; t < m.pi.cells(); ++t) {
      double p = m.pi[t];
      for (Index v = 0; v < 2; ++v)
        p *= std::exp(log_density(m.views[v].components[m.pi.axis_index(t, v)], x[v].row(i).transpose()));
      f += p;
    }
    s += std::log(f);
  }
  return s;
}

}  // namespace

TEST(ProbTable, ConstructionAndMarginals) {
  const ProbTable pi = small_model().pi;
  EXPECT_EQ(pi.cells(), 6);
  EXPECT_NEAR(pi.marginal(0)(0), 0.45, 1e-15);
  EXPECT_NEAR(pi.marginal(1)(2), 0.35, 1e-15);
  EXPECT_EQ(pi.support_size(), 5);
  EXPECT_THROW(ProbTable({2}, (VectorXd(2) << 0.5, 0.6).finished()), ContractError);
  EXPECT_THROW(ProbTable({3}, (VectorXd(2) << 0.5, 0.5).finished()), ShapeError);
}

TEST(LogLikelihood, TrivialTableIsSumOfViewDensities) {
  MvmmModel m;
  m.views.resize(2);
  m.views[0].components = {comp(1, 2)};
  m.views[1].components = {comp(-1, 0.5)};
  m.pi = ProbTable::uniform({1, 1});
  MultiViewData x{MatrixXd::Constant(1, 1, 0.4), MatrixXd::Constant(1, 1, 0.1)};
  EXPECT_NEAR(log_likelihood(m, x),
              log_density(m.views[0].components[0], x[0].row(0).transpose()) +
                  log_density(m.views[1].components[0], x[1].row(0).transpose()),
              1e-12);
}

TEST(LogLikelihood, RankOneTableFactorizes) {
  MvmmModel m = small_model();
  const VectorXd r = (VectorXd(2) << 0.3, 0.7).finished(), c = (VectorXd(3) << 0.2, 0.5, 0.3).finished();
  m.pi = ProbTable::from_matrix(r * c.transpose());
  const MultiViewData x = small_data(30, 5);
  const double expect = gmm_log_likelihood(m.views[0], r, x[0]) + gmm_log_likelihood(m.views[1], c, x[1]);
  EXPECT_NEAR(log_likelihood(m, x), expect, 1e-9);
}

TEST(LogLikelihood, MatchesNaiveSummation) {
  const MvmmModel m = small_model();
  const MultiViewData x = small_data(40, 6);
  EXPECT_NEAR(log_likelihood(m, x), naive_log_lik(m, x), 1e-10 * std::abs(naive_log_lik(m, x)));
  MultiViewData twice{MatrixXd(80, 2), MatrixXd(80, 1)};
  for (Index v = 0; v < 2; ++v) twice[v] << x[v], x[v];
  EXPECT_NEAR(log_likelihood(m, twice), 2.0 * log_likelihood(m, x), 1e-9);
  EXPECT_EQ(log_likelihood(m, MultiViewData{MatrixXd(0, 2), MatrixXd(0, 1)}), 0.0);
}

TEST(EStep, SymmetricPointSplitsEvenly) {
  MvmmModel m;
  m.views.resize(2);
  m.views[0].components = {comp(-1, 1), comp(1, 1)};
  m.views[1].components = {comp(0, 1)};
  m.pi = ProbTable::uniform({2, 1});
  const Responsibilities r = e_step(m, {MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1)});
  EXPECT_NEAR(r.gamma(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r.gamma(0, 1), 0.5, 1e-15);
}

TEST(EStep, ZeroCellsGetZeroResponsibility) {
  const MvmmModel m = small_model();
  const Responsibilities r = e_step(m, small_data(25, 7));
  EXPECT_TRUE(r.gamma.col(3).isZero(0.0));
  EXPECT_TRUE((r.gamma.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  EXPECT_NEAR(r.a.sum(), 1.0, 1e-12);
}

TEST(FitEm, SingleComponentsConvergeToGlobalMoments) {
  const MultiViewData x = small_data(60, 8);
  EmConfig cfg;
  cfg.n_init = 1;
  const MvmmFit f = fit_em(x, {1, 1}, cfg);
  EXPECT_LE(f.trace.iterations, 2);
  for (Index v = 0; v < 2; ++v)
    EXPECT_TRUE(f.model.views[v].components[0].mean.isApprox(VectorXd(x[v].colwise().mean().transpose()), 1e-12));
}

TEST(FitEm, LogLikelihoodIsNondecreasing) {
  const MultiViewData x = small_data(300, 9);
  EmConfig cfg;
  cfg.n_init = 3;
  cfg.seed = 2;
  const MvmmFit f = fit_em(x, {2, 3}, cfg);
  const auto& o = f.trace.objective;
  for (std::size_t i = 1; i < o.size(); ++i) EXPECT_GE(o[i], o[i - 1] - 1e-9 * std::abs(o[i - 1]));
  EXPECT_TRUE(f.trace.violations.empty());
  EXPECT_GT(o.back(), log_likelihood(small_model(), x) - 20.0);
}

TEST(FitEm, DiagonalTableConcentratesOnAPermutation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig c;
    c.design.kind = PiKind::diagonal;
    c.design.k = 10;
    c.seed = seed;
    const MvmmModel truth = sim_truth(c, 0);
    const SimData d = sim_train(c, truth, 0, 4000);
    EmConfig cfg;
    cfg.seed = seed;
    const MvmmFit f = fit_em(d.x, {10, 10}, cfg);
    const MatrixXd p = f.model.pi.matrix();
    // plain EM started at the truth keeps the diagonal support exactly
    MvmmModel from_truth = truth;
    FitTrace t;
    run_em(
        from_truth, d.x, view_floors(d.x, cfg.reg_rel),
        [](const VectorXd& a) { return pi_from_averages({10, 10}, a); }, [](const MvmmModel&, double ll) { return ll; },
        cfg.max_iter, cfg.rel_tol, t);
    EXPECT_GE(f.trace.objective.back(), t.objective.back()) << "seed " << seed;
    std::vector<double> v(p.data(), p.data() + p.size());
    std::sort(v.begin(), v.end(), std::greater<>());
    double top = 0.0;
    for (int i = 0; i < 10; ++i) top += v[i];
    EXPECT_GE(top, 0.9) << "seed " << seed;
    std::vector<Index> col(10);
    for (Index r = 0; r < 10; ++r) p.row(r).maxCoeff(&col[r]);
    std::sort(col.begin(), col.end());
    EXPECT_EQ(std::unique(col.begin(), col.end()) - col.begin(), 10) << "seed " << seed;
  }
}

TEST(FitEm, Contracts) {
  const MultiViewData x = small_data(5, 1);
  EXPECT_THROW(fit_em(x, {2}), ShapeError);
  EXPECT_THROW(fit_em(x, {6, 1}), ContractError);
  EXPECT_THROW(fit_em({MatrixXd::Zero(3, 1), MatrixXd::Zero(4, 1)}, {1, 1}), ShapeError);
}

TEST(Predict, FarPointAndArgmax) {
  const MvmmModel m = small_model();
  MultiViewData x{MatrixXd::Constant(1, 2, 1.0), MatrixXd::Constant(1, 1, -3.0)};
  const Prediction p = predict(m, x);
  EXPECT_EQ(p.overall[0], 1 * 3 + 2);
  EXPECT_EQ(p.per_view[0][0], 1);
  EXPECT_EQ(p.per_view[1][0], 2);

  const MultiViewData y = small_data(50, 10);
  const Responsibilities r = e_step(m, y);
  const Prediction q = predict(m, y);
  for (Index i = 0; i < 50; ++i) {
    Index best = 0;
    for (Index t = 1; t < r.gamma.cols(); ++t)
      if (r.gamma(i, t) > r.gamma(i, best)) best = t;
    EXPECT_EQ(q.overall[i], best);
  }
}
