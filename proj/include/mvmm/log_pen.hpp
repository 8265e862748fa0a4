#pragma once

// Log-penalized MVMM. The pi M-step is replaced by normalized soft
// thresholding of the average responsibilities.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/mvmm_core.hpp"
#include "mvmm/prob_table.hpp"

namespace mvmm {

/// (a - lambda)_+ renormalized. Requires 0 <= lambda < 1 / a.size().
inline VectorXd soft_threshold_simplex(const VectorXd& a, double lambda) {
  const double cells = static_cast<double>(a.size());
  if (!(lambda >= 0.0) || !(lambda < 1.0 / cells))
    throw ContractError("soft_threshold_simplex: lambda must lie in [0, 1/" + std::to_string(a.size()) + ")");
  VectorXd z = (a.array() - lambda).cwiseMax(0.0).matrix();
  const double s = z.sum();
  if (!(s > 0.0)) throw NumericError("soft_threshold_simplex: every entry was thresholded");
  return z / s;
}

inline ProbTable soft_threshold_simplex(const ProbTable& a, double lambda) {
  return ProbTable::normalized(a.shape(), soft_threshold_simplex(a.values(), lambda));
}

/// Sum_t log(delta + pi_t).
inline double log_penalty(const ProbTable& pi, double delta) {
  return (pi.values().array() + delta).log().sum();
}

/// l(data) - n * lambda * sum_t log(delta + pi_t). The penalty is scaled by n
/// so that lambda is the per-observation threshold used by the pi update.
inline double penalized_objective(const MvmmModel& m, const MultiViewData& data, double lambda, double delta) {
  const double n = static_cast<double>(check_data(data));
  return log_likelihood(m, data) - n * lambda * log_penalty(m.pi, delta);
}

struct LogPenConfig {
  double lambda = 1e-3;
  double delta = 1e-6;
  int init_iter = 10;  // unpenalized EM steps before thresholding starts
  double slack = 1e-6; // relative objective decrease tolerated before logging
  EmConfig em;
  bool log_violations = true;
};

inline void validate(const LogPenConfig& cfg, const std::vector<Index>& k) {
  double cells = 1.0;
  for (Index kv : k) cells *= static_cast<double>(kv);
  if (!(cfg.lambda > 0.0) || !(cfg.lambda < 1.0 / cells))
    throw ContractError("lambda must lie in (0, " + std::to_string(1.0 / cells) + ")");
  if (!(cfg.delta > 0.0)) throw ContractError("delta must be positive");
}

/// EM for the penalized problem. Each start runs cfg.init_iter plain EM
/// steps, then thresholded EM; the start with the best penalized objective
/// wins. The trace holds the penalized objective of the thresholded phase.
inline MvmmFit fit_log_pen(const MultiViewData& data, const std::vector<Index>& k, const LogPenConfig& cfg) {
  check_components(data, k);
  validate(cfg, k);
  const auto floors = view_floors(data, cfg.em.reg_rel);
  const double n = static_cast<double>(check_data(data));
  MvmmFit best;
  double best_obj = -std::numeric_limits<double>::infinity();
  auto objective = [&](const MvmmModel& m, double ll) { return ll - n * cfg.lambda * log_penalty(m.pi, cfg.delta); };
  for (int s = 0; s < std::max(cfg.em.n_init, 1); ++s) {
    Rng rng = make_rng(cfg.em.seed, {hash_tag("mvmm-init"), static_cast<std::uint64_t>(s)});
    MvmmFit fit;
    fit.model = init_model(data, k, floors, rng);
    FitTrace warm;
    run_em(
        fit.model, data, floors, [&](const VectorXd& a) { return pi_from_averages(k, a); },
        [](const MvmmModel&, double ll) { return ll; }, cfg.init_iter, 0.0, warm);
    run_em(
        fit.model, data, floors,
        [&](const VectorXd& a) { return ProbTable::normalized(k, soft_threshold_simplex(a, cfg.lambda)); }, objective,
        cfg.em.max_iter, cfg.em.rel_tol, fit.trace, cfg.slack);
    if (cfg.log_violations)
      for (int it : fit.trace.violations)
        std::clog << "log-penalized EM: objective decreased at iteration " << it << " (start " << s << ")\n";
    fit.trace.best_restart = s;
    if (fit.trace.objective.back() > best_obj) {
      best_obj = fit.trace.objective.back();
      best = std::move(fit);
    }
  }
  return best;
}

/// Geometric grid of `count` lambdas on [lo, 0.99 / prod(K)].
inline std::vector<double> lambda_grid(const std::vector<Index>& k, int count = 20, double lo = 1e-4) {
  double cells = 1.0;
  for (Index kv : k) cells *= static_cast<double>(kv);
  const double hi = 0.99 / cells;
  if (!(lo > 0.0) || !(lo < hi)) throw ContractError("lambda_grid: empty range");
  std::vector<double> g;
  if (count == 1) return {hi};
  for (int i = 0; i < count; ++i)
    g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1)));
  return g;
}

}  // namespace mvmm
