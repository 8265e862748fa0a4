#pragma once

// Block diagonally constrained two-view MVMM with pi = eps 11^T + D. The
// block constraint is enforced through a penalty alpha * (sum of the B
// smallest eigenvalues of L_sym(A_bp(D))), with alpha increased until D has
// B blocks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvmm/barrier.hpp"
#include "mvmm/block_diag_opt.hpp"
#include "mvmm/errors.hpp"
#include "mvmm/geig.hpp"
#include "mvmm/laplacian.hpp"
#include "mvmm/mvmm_core.hpp"

namespace mvmm {

/// argmin_{x >= 0} -a log(x + eps) + b x.
inline double positive_part_closed_form(double a, double b, double eps) {
  if (!(a > 0.0) || !(b > 0.0) || !(eps > 0.0))
    throw ContractError("positive_part_closed_form: a, b and eps must be positive");
  return std::max(a / b - eps, 0.0);
}

struct AlphaGuess {
  double alpha = 0.0;
  bool done = false;  // every coupling entry is zero, the penalty is inert
};

/// c * median of a / (eps * M) over the entries with M > m_tol. Coupling
/// entries are squared differences of unit-scale eigenvector entries, so
/// values at rounding level count as zero.
inline AlphaGuess alpha_heuristic(const MatrixXd& a, const MatrixXd& m, double eps, double c = 0.01,
                                  double m_tol = 1e-12) {
  if (a.rows() != m.rows() || a.cols() != m.cols()) throw ShapeError("alpha_heuristic: a and M differ in shape");
  if (!(eps > 0.0)) throw ContractError("alpha_heuristic: eps must be positive");
  std::vector<double> ratios;
  for (Index i = 0; i < a.size(); ++i)
    if (m.data()[i] > m_tol) ratios.push_back(a.data()[i] / (eps * m.data()[i]));
  AlphaGuess g;
  if (ratios.empty()) {
    g.done = true;
    return g;
  }
  std::sort(ratios.begin(), ratios.end());
  const std::size_t h = ratios.size() / 2;
  const double med = ratios.size() % 2 ? ratios[h] : 0.5 * (ratios[h - 1] + ratios[h]);
  g.alpha = c * med;
  return g;
}

inline AlphaGuess alpha_heuristic(const MatrixXd& a, const EigenBasis& u, double eps, double c = 0.01) {
  return alpha_heuristic(a, coupling_matrix(u, VectorXd::Ones(u.k())), eps, c);
}

/// Entrywise -a_j log(eps + x_j) + alpha M_j x_j, flattened row-major.
struct DStepObjective {
  VectorXd a, m;
  double alpha = 0.0, eps = 0.0;

  Index size() const { return a.size(); }
  double value(Index j, double x) const { return -a(j) * std::log(eps + x) + alpha * m(j) * x; }
  double grad(Index j, double x) const { return -a(j) / (eps + x) + alpha * m(j); }
  double hess(Index j, double x) const { return a(j) / ((eps + x) * (eps + x)); }
};

namespace detail {
inline VectorXd flatten(const MatrixXd& x) {
  VectorXd v(x.size());
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) v(r * x.cols() + c) = x(r, c);
  return v;
}
inline MatrixXd unflatten(const VectorXd& v, Index rows, Index cols) {
  MatrixXd x(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) x(r, c) = v(r * cols + c);
  return x;
}
}  // namespace detail

struct DStepResult {
  MatrixXd d;
  VectorXd nu;
  KktResiduals kkt;
  int newton_steps = 0;
};

/// Minimizes -sum a log(eps + D) + alpha <D, spec.coupling> over D >= 0 and
/// the equalities of `spec`, starting from `x0` (need not be feasible).
inline DStepResult d_step(const MatrixXd& a, const SubproblemSpec& spec, double alpha, double eps,
                          const MatrixXd& x0, const BarrierSettings& settings = {}) {
  if (a.rows() != spec.rows() || a.cols() != spec.cols() || x0.rows() != a.rows() || x0.cols() != a.cols())
    throw ShapeError("d_step: a, coupling and start point must share a shape");
  require_nonnegative(a, "d_step");
  if (!(alpha >= 0.0) || !(eps > 0.0)) throw ContractError("d_step: need alpha >= 0 and eps > 0");
  DStepObjective f{detail::flatten(a), detail::flatten(spec.coupling), alpha, eps};
  BarrierResult br;
  try {
    br = solve_separable_barrier(f, spec.eq_matrix(), spec.eq_rhs(), detail::flatten(x0), settings);
  } catch (const BarrierStall& e) {
    throw BarrierStall(std::string("d_step: ") + e.what() + "; the constraint system may be infeasible", e.best);
  }
  DStepResult out;
  out.d = detail::unflatten(br.x, a.rows(), a.cols());
  out.nu = br.nu;
  out.kkt = br.kkt;
  out.newton_steps = br.newton_steps;
  return out;
}

struct BdConfig {
  Index b = 1;
  double epsilon = 0.0;  // 0 selects 0.01 / (K1 K2)
  std::optional<double> alpha0;
  double alpha_factor = 2.0;
  double c_heuristic = 0.01;
  double alpha_max = 1e12;
  double eigsum_tol = 1e-6;   // blocks are reached when eigsum(D, 1_B) is below this
  double support_rel = 1e-8;  // support threshold relative to max D
  StoppingRule inner{1e-8, 200};
  int init_iter = 10;  // plain EM steps per start before the constrained fit
  EmConfig em;
  BarrierSettings barrier;
};

inline double resolve_epsilon(const BdConfig& cfg, const std::vector<Index>& k) {
  const double cells = static_cast<double>(k.at(0) * k.at(1));
  const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : 0.01 / cells;
  if (!(eps < 1.0 / cells)) throw ContractError("epsilon must lie in (0, 1/(K1 K2))");
  return eps;
}

inline void validate(const BdConfig& cfg, const std::vector<Index>& k) {
  if (k.size() != 2) throw ShapeError("the block diagonal fit needs exactly two views");
  if (cfg.b < 1 || cfg.b > std::min(k[0], k[1]))
    throw ContractError("B must lie in [1, min(K1, K2)] = [1, " + std::to_string(std::min(k[0], k[1])) + "]");
  if (cfg.epsilon < 0.0) throw ContractError("epsilon must be positive");
  if (!(cfg.alpha_factor > 1.0)) throw ContractError("alpha_factor must exceed 1");
  if (cfg.alpha0 && !(*cfg.alpha0 > 0.0)) throw ContractError("alpha0 must be positive");
  resolve_epsilon(cfg, k);
}

/// pi = eps 11^T + d as a ProbTable.
inline ProbTable bd_pi(const MatrixXd& d, double eps) {
  MatrixXd p = d.array() + eps;
  return ProbTable::normalized({d.rows(), d.cols()}, detail::flatten(p));
}

/// Objective oracle of the inner loop: holds the view parameters, evaluates
/// -l(Theta, eps + D) / n and performs E-step, Theta update and D step.
class BdOracle {
 public:
  BdOracle(const MultiViewData& data, std::vector<ViewModel> views, std::vector<VectorXd> floors, double eps,
           BarrierSettings barrier)
      : data_(data), views_(std::move(views)), floors_(std::move(floors)), eps_(eps), barrier_(barrier),
        n_(static_cast<double>(check_data(data))) {}

  double evaluate(const MatrixXd& x) { return -responsibilities(x).log_lik / n_; }

  MatrixXd solve_subproblem(const SubproblemSpec& spec, double alpha, const MatrixXd& x) {
    const Responsibilities r = responsibilities(x);
    MvmmModel m = model(x);
    for (std::size_t v = 0; v < views_.size(); ++v) {
      const MatrixXd w = view_responsibilities(r.gamma, m.pi, static_cast<Index>(v));
      views_[v] = weighted_mle_update(data_[v], w, floors_[v], &views_[v]).model;
    }
    cache_valid_ = false;
    const MatrixXd a = detail::unflatten(r.a, x.rows(), x.cols());
    DStepResult ds = d_step(a, spec, alpha, eps_, x, barrier_);
    newton_steps_ += ds.newton_steps;
    last_kkt_ = ds.kkt;
    return ds.d;
  }

  MvmmModel model(const MatrixXd& d) const { return MvmmModel{views_, bd_pi(d, eps_)}; }
  const std::vector<ViewModel>& views() const { return views_; }
  Responsibilities responsibilities(const MatrixXd& x) {
    if (!cache_valid_ || cache_x_.rows() != x.rows() || cache_x_.cols() != x.cols() || cache_x_ != x) {
      cache_r_ = e_step(model(x), data_);
      cache_x_ = x;
      cache_valid_ = true;
    }
    return cache_r_;
  }
  long newton_steps() const { return newton_steps_; }
  const KktResiduals& last_kkt() const { return last_kkt_; }

 private:
  const MultiViewData& data_;
  std::vector<ViewModel> views_;
  std::vector<VectorXd> floors_;
  double eps_;
  BarrierSettings barrier_;
  double n_;
  MatrixXd cache_x_;
  Responsibilities cache_r_;
  bool cache_valid_ = false;
  long newton_steps_ = 0;
  KktResiduals last_kkt_;
};

struct BdRound {
  double alpha = 0.0;
  std::vector<double> objective;  // -l/n + alpha * eigsum per inner iteration
  std::vector<double> eigsum;
  int iterations = 0;
  bool converged = false;
};

struct BdFit {
  MvmmModel model;  // pi = eps 11^T + d
  MatrixXd d;
  double epsilon = 0.0;
  EigenBasis basis;
  BlockStructure blocks;
  std::vector<BdRound> rounds;
  bool success = false;
  double log_lik = 0.0;

  Index support_size() const { return static_cast<Index>((d.array() > 0.0).count()); }
};

/// Initial state shared by the constrained fits: best of n_init starts after
/// init_iter plain EM steps.
inline MvmmModel warm_start(const MultiViewData& data, const std::vector<Index>& k, const std::vector<VectorXd>& floors,
                            const EmConfig& em, int init_iter) {
  MvmmModel best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(em.n_init, 1); ++s) {
    Rng rng = make_rng(em.seed, {hash_tag("mvmm-init"), static_cast<std::uint64_t>(s)});
    MvmmModel m = init_model(data, k, floors, rng);
    FitTrace t;
    run_em(
        m, data, floors, [&](const VectorXd& a) { return pi_from_averages(k, a); },
        [](const MvmmModel&, double ll) { return ll; }, init_iter, 0.0, t);
    if (t.objective.back() > best_ll) {
      best_ll = t.objective.back();
      best = std::move(m);
    }
  }
  return best;
}

/// Nested loop: at each alpha the inner alternation runs to convergence,
/// then alpha grows by alpha_factor until eigsum(D, 1_B) <= eigsum_tol and D
/// has at least B blocks. Throws NumericError once alpha exceeds alpha_max.
inline BdFit fit_bd(const MultiViewData& data, const std::vector<Index>& k, const BdConfig& cfg) {
  check_components(data, k);
  validate(cfg, k);
  const double eps = resolve_epsilon(cfg, k);
  const double mass = 1.0 - static_cast<double>(k[0] * k[1]) * eps;
  const auto floors = view_floors(data, cfg.em.reg_rel);

  const MvmmModel start = warm_start(data, k, floors, cfg.em, cfg.init_iter);
  MatrixXd d = mass * start.pi.matrix();
  BdOracle oracle(data, start.views, floors, eps, cfg.barrier);
  const VectorXd w = VectorXd::Ones(cfg.b);

  double alpha;
  if (cfg.alpha0) {
    alpha = *cfg.alpha0;
  } else {
    const MatrixXd a = detail::unflatten(oracle.responsibilities(d).a, k[0], k[1]);
    const AlphaGuess g = alpha_heuristic(a, smallest_generalized_eigenbasis(d, cfg.b, w), eps, cfg.c_heuristic);
    alpha = g.done || !(g.alpha > 0.0) ? 1.0 : g.alpha;
  }

  BdFit fit;
  fit.epsilon = eps;
  while (true) {
    AlternateTrace tr = alternate(oracle, d, cfg.b, w, alpha, cfg.inner, mass);
    d = tr.x;
    fit.rounds.push_back({alpha, tr.objective, tr.eigsum, tr.iterations, tr.converged});
    fit.basis = tr.basis;
    const double es = tr.eigsum.back();
    if (es <= cfg.eigsum_tol) {
      const BlockStructure bs = count_blocks(d, cfg.support_rel * d.maxCoeff());
      if (bs.num_blocks >= cfg.b) {
        fit.success = true;
        break;
      }
    }
    alpha *= cfg.alpha_factor;
    if (alpha > cfg.alpha_max)
      throw NumericError("alpha exceeded " + std::to_string(cfg.alpha_max) + " without reaching " +
                         std::to_string(cfg.b) + " blocks; B may be unattainable for these data");
  }

  const double tol = cfg.support_rel * d.maxCoeff();
  d = d.unaryExpr([tol](double x) { return x > tol ? x : 0.0; });
  d *= mass / d.sum();
  fit.d = d;
  fit.blocks = count_blocks(d, 0.0);
  fit.model = oracle.model(d);
  fit.log_lik = log_likelihood(fit.model, data);
  return fit;
}

/// Sums each observation's responsibilities over the cells (r, c) whose row
/// and column both carry block label b, then takes the argmax over b (lowest
/// b on ties). Cells outside every block are ignored.
inline std::vector<int> predict_block_labels(const MvmmModel& m, const std::vector<int>& row_block,
                                             const std::vector<int>& col_block, Index num_blocks,
                                             const MultiViewData& data) {
  const Index n = check_data(data);
  if (num_blocks <= 1) return std::vector<int>(n, 0);
  const Responsibilities r = e_step(m, data);
  const Index k1 = m.pi.shape().at(0), k2 = m.pi.shape().at(1);
  if (static_cast<Index>(row_block.size()) != k1 || static_cast<Index>(col_block.size()) != k2)
    throw ShapeError("predict_block_labels: block labels do not match pi's shape");
  MatrixXd s = MatrixXd::Zero(n, num_blocks);
  for (Index i = 0; i < k1; ++i)
    for (Index j = 0; j < k2; ++j)
      if (row_block[i] >= 0 && row_block[i] == col_block[j]) s.col(row_block[i]) += r.gamma.col(i * k2 + j);
  std::vector<int> labels(n);
  for (Index i = 0; i < n; ++i) {
    Index best;
    s.row(i).maxCoeff(&best);
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

inline std::vector<int> predict_block_labels(const MvmmModel& m, const BlockStructure& bs, const MultiViewData& data) {
  return predict_block_labels(m, bs.row_block(), bs.col_block(), bs.num_blocks, data);
}

}  // namespace mvmm
