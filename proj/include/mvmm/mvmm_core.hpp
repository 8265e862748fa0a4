#pragma once

// Multi-view mixture model: views are conditionally independent given the
// tuple of view labels, whose joint distribution is a ProbTable.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/mixtures.hpp"
#include "mvmm/prob_table.hpp"
#include "mvmm/rng.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

/// One n x d_v matrix per view, rows aligned across views.
using MultiViewData = std::vector<MatrixXd>;

inline Index check_data(const MultiViewData& data) {
  if (data.empty()) throw ShapeError("multi-view data needs at least one view");
  const Index n = data.front().rows();
  for (const auto& v : data)
    if (v.rows() != n) throw ShapeError("all views must have the same number of rows");
  return n;
}

struct MvmmModel {
  std::vector<ViewModel> views;
  ProbTable pi;

  std::vector<Index> shape() const {
    std::vector<Index> s;
    for (const auto& v : views) s.push_back(v.k());
    return s;
  }

  void validate() const {
    if (views.empty()) throw ShapeError("MvmmModel: no views");
    if (shape() != pi.shape()) throw ShapeError("MvmmModel: pi shape does not match the view component counts");
    for (const auto& v : views)
      for (const auto& c : v.components)
        if (c.variance.size() != v.dim() || c.mean.size() != v.dim() || !(c.variance.minCoeff() > 0.0))
          throw ContractError("MvmmModel: component dimensions or variances are invalid");
  }
};

namespace detail {

// idx[v][t] = label of view v in flat cell t.
inline std::vector<std::vector<Index>> cell_labels(const ProbTable& pi) {
  std::vector<std::vector<Index>> idx(pi.num_views(), std::vector<Index>(pi.cells()));
  for (Index v = 0; v < pi.num_views(); ++v)
    for (Index t = 0; t < pi.cells(); ++t) idx[v][t] = pi.axis_index(t, v);
  return idx;
}

// n x T matrix of log pi_t + sum_v log phi_v(x_i^(v) | t_v).
inline MatrixXd joint_log_matrix(const MvmmModel& m, const MultiViewData& data) {
  const Index n = check_data(data);
  if (static_cast<Index>(data.size()) != static_cast<Index>(m.views.size()))
    throw ShapeError("number of data views does not match the model");
  const Index t_cells = m.pi.cells();
  const auto idx = cell_labels(m.pi);
  std::vector<MatrixXd> ld;
  for (std::size_t v = 0; v < data.size(); ++v) ld.push_back(log_density_matrix(m.views[v], data[v]));
  MatrixXd out(n, t_cells);
  for (Index t = 0; t < t_cells; ++t) {
    const double lp = m.pi[t] > 0.0 ? std::log(m.pi[t]) : -std::numeric_limits<double>::infinity();
    auto col = out.col(t).array();
    col = ld[0].col(idx[0][t]).array() + lp;
    for (std::size_t v = 1; v < ld.size(); ++v) col += ld[v].col(idx[v][t]).array();
  }
  return out;
}

}  // namespace detail

struct Responsibilities {
  MatrixXd gamma;  // n x T, rows sum to 1
  VectorXd a;      // column means of gamma
  double log_lik = 0.0;
};

inline Responsibilities e_step(const MvmmModel& m, const MultiViewData& data) {
  const MatrixXd lj = detail::joint_log_matrix(m, data);
  Responsibilities r;
  const VectorXd lse = detail::logsumexp_rows(lj, &r.gamma);
  r.a = lj.rows() > 0 ? VectorXd(r.gamma.colwise().mean().transpose()) : VectorXd::Zero(lj.cols());
  r.log_lik = lse.sum();
  return r;
}

inline double log_likelihood(const MvmmModel& m, const MultiViewData& data) {
  if (check_data(data) == 0) return 0.0;
  return detail::logsumexp_rows(detail::joint_log_matrix(m, data)).sum();
}

/// log f(x) for one observation given as the concatenation of its views.
inline double observed_log_density(const MvmmModel& m, const VectorXd& x) {
  Index total = 0;
  for (const auto& v : m.views) total += v.dim();
  if (x.size() != total) throw ShapeError("observed_log_density: dimension mismatch");
  MultiViewData one;
  Index off = 0;
  for (const auto& v : m.views) {
    one.push_back(x.segment(off, v.dim()).transpose());
    off += v.dim();
  }
  return log_likelihood(m, one);
}

/// n x K_v responsibilities of view v's components (gamma summed over the
/// other views' labels).
inline MatrixXd view_responsibilities(const MatrixXd& gamma, const ProbTable& pi, Index v) {
  MatrixXd w = MatrixXd::Zero(gamma.rows(), pi.shape().at(v));
  for (Index t = 0; t < pi.cells(); ++t) w.col(pi.axis_index(t, v)) += gamma.col(t);
  return w;
}

struct EmConfig {
  int n_init = 10;
  int max_iter = 300;
  double rel_tol = 1e-8;
  double reg_rel = 1e-6;
  std::uint64_t seed = 0;
};

struct FitTrace {
  std::vector<double> objective;  // one entry per parameter state, starting with the initial one
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;
  std::vector<int> violations;  // iterations where the objective moved the wrong way
};

struct MvmmFit {
  MvmmModel model;
  FitTrace trace;
};

inline std::vector<VectorXd> view_floors(const MultiViewData& data, double reg_rel) {
  std::vector<VectorXd> f;
  for (const auto& v : data) f.push_back(covariance_floor(v, reg_rel));
  return f;
}

inline void check_components(const MultiViewData& data, const std::vector<Index>& k) {
  const Index n = check_data(data);
  if (k.size() != data.size()) throw ShapeError("need one component count per view");
  for (Index kv : k) {
    if (kv < 1) throw ContractError("component counts must be >= 1");
    if (kv > n) throw ContractError("component count " + std::to_string(kv) + " exceeds n=" + std::to_string(n));
  }
}

/// Per-view k-means++ initialization of the components, uniform pi.
inline MvmmModel init_model(const MultiViewData& data, const std::vector<Index>& k,
                            const std::vector<VectorXd>& floors, Rng& rng) {
  MvmmModel m;
  for (std::size_t v = 0; v < data.size(); ++v) m.views.push_back(init_from_kmeans(data[v], k[v], floors[v], rng));
  m.pi = ProbTable::uniform(k);
  return m;
}

/// Updates the view components from responsibilities, then pi via `pi_update(a)`.
template <class PiUpdate>
void m_step(MvmmModel& m, const Responsibilities& r, const MultiViewData& data,
            const std::vector<VectorXd>& floors, PiUpdate&& pi_update) {
  for (std::size_t v = 0; v < data.size(); ++v) {
    const MatrixXd w = view_responsibilities(r.gamma, m.pi, static_cast<Index>(v));
    m.views[v] = weighted_mle_update(data[v], w, floors[v], &m.views[v]).model;
  }
  m.pi = pi_update(r.a);
}

/// Runs EM from `m` in place. `objective(model, log_lik)` is recorded per
/// state; iteration stops when its relative change drops below rel_tol.
/// Decreases larger than `slack` relative are recorded as violations.
template <class PiUpdate, class Objective>
void run_em(MvmmModel& m, const MultiViewData& data, const std::vector<VectorXd>& floors, PiUpdate&& pi_update,
            Objective&& objective, int max_iter, double rel_tol, FitTrace& trace, double slack = 1e-9) {
  Responsibilities r = e_step(m, data);
  double prev = objective(m, r.log_lik);
  trace.objective.push_back(prev);
  for (int it = 0; it < max_iter; ++it) {
    m_step(m, r, data, floors, pi_update);
    r = e_step(m, data);
    const double val = objective(m, r.log_lik);
    trace.objective.push_back(val);
    ++trace.iterations;
    if (val < prev - slack * (std::abs(prev) + 1.0)) trace.violations.push_back(trace.iterations);
    const bool done = std::abs(val - prev) / (std::abs(prev) + 1.0) < rel_tol;
    prev = val;
    if (done) {
      trace.converged = true;
      break;
    }
  }
}

inline ProbTable pi_from_averages(const std::vector<Index>& shape, const VectorXd& a) {
  return ProbTable::normalized(shape, a);
}

/// Unpenalized EM; best final log-likelihood over cfg.n_init starts.
inline MvmmFit fit_em(const MultiViewData& data, const std::vector<Index>& k, const EmConfig& cfg = {}) {
  check_components(data, k);
  const auto floors = view_floors(data, cfg.reg_rel);
  MvmmFit best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(cfg.n_init, 1); ++s) {
    Rng rng = make_rng(cfg.seed, {hash_tag("mvmm-init"), static_cast<std::uint64_t>(s)});
    MvmmFit fit;
    fit.model = init_model(data, k, floors, rng);
    run_em(
        fit.model, data, floors, [&](const VectorXd& a) { return pi_from_averages(k, a); },
        [](const MvmmModel&, double ll) { return ll; }, cfg.max_iter, cfg.rel_tol, fit.trace);
    fit.trace.best_restart = s;
    if (fit.trace.objective.back() > best_ll) {
      best_ll = fit.trace.objective.back();
      best = std::move(fit);
    }
  }
  return best;
}

struct Prediction {
  std::vector<int> overall;                // flat cell index of the most probable label tuple
  std::vector<std::vector<int>> per_view;  // per view, most probable component
};

inline Prediction predict(const MvmmModel& m, const MultiViewData& data) {
  const Responsibilities r = e_step(m, data);
  Prediction p;
  const Index n = r.gamma.rows();
  p.overall.resize(n);
  for (Index i = 0; i < n; ++i) {
    Index best;
    r.gamma.row(i).maxCoeff(&best);
    p.overall[i] = static_cast<int>(best);
  }
  for (Index v = 0; v < m.pi.num_views(); ++v) {
    const MatrixXd w = view_responsibilities(r.gamma, m.pi, v);
    std::vector<int> lab(n);
    for (Index i = 0; i < n; ++i) {
      Index best;
      w.row(i).maxCoeff(&best);
      lab[i] = static_cast<int>(best);
    }
    p.per_view.push_back(std::move(lab));
  }
  return p;
}

}  // namespace mvmm
