#pragma once

// Alternating solver for
//
//   minimize f(X) + alpha * sum_j w_j lambda_(j)(L_sym(A_bp(X)))  s.t. X >= 0
//
// through its extremal form: the U step is a generalized eigenproblem and the
// X step minimizes f(X) + alpha <X, M(U, w)> under the linear constraints
// U^T diag(deg(A_bp(X))) U = I, delegated to an objective oracle.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/geig.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

/// M_rc = || diag(w)^{1/2} (U_rows(r,:) - U_cols(c,:)) ||^2, so that
/// Tr(U^T L_un(A_bp(X)) U diag(w)) = <X, M>.
inline MatrixXd coupling_matrix(const MatrixXd& u, Index n_rows, const VectorXd& w) {
  if (w.size() != u.cols()) throw ShapeError("coupling_matrix: weight length must equal K");
  if (n_rows < 0 || n_rows > u.rows()) throw ShapeError("coupling_matrix: bad row count");
  const Index r = n_rows, c = u.rows() - n_rows;
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < u.cols(); ++k) {
        const double d = u(i, k) - u(r + j, k);
        acc += w(k) * d * d;
      }
      m(i, j) = acc;
    }
  return m;
}

inline MatrixXd coupling_matrix(const EigenBasis& basis, const VectorXd& w) {
  return coupling_matrix(basis.u, basis.n_rows, w);
}

/// Indices of a maximal linearly independent subset of the rows of
/// `stacked`. Singular values below rel_tol times the largest count as
/// dependent; the kept rows are chosen by column-pivoted QR and returned in
/// ascending order.
inline std::vector<Index> independent_rows(const MatrixXd& stacked, double rel_tol = 1e-10) {
  std::vector<Index> kept;
  if (stacked.rows() == 0) return kept;
  const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(stacked).singularValues();
  const double top = sv.size() ? sv(0) : 0.0;
  if (!(top > 0.0)) return kept;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * top) ++rank;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(stacked.transpose());
  const auto& perm = qr.colsPermutation().indices();
  for (Index i = 0; i < rank; ++i) kept.push_back(perm(i));
  std::sort(kept.begin(), kept.end());
  return kept;
}

struct ConstraintRows {
  MatrixXd c_diag;  // (R+C) x K, entries U .* U
  MatrixXd c_utri;  // (R+C) x K(K-1)/2, columns U_l .* U_j for l < j
  std::vector<std::pair<Index, Index>> utri_pairs;
  std::vector<Index> kept;  // surviving rows of the stacked [diag; utri] system
};

namespace detail {
// Coefficient table of X for sum_i deg_i(X) v_i, flattened row-major.
inline VectorXd degree_weighted_row(const VectorXd& v, Index r, Index c) {
  VectorXd row(r * c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) row(i * c + j) = v(i) + v(r + j);
  return row;
}
}  // namespace detail

inline ConstraintRows constraint_rows(const MatrixXd& u, Index n_rows) {
  const Index k = u.cols(), n = u.rows();
  const Index r = n_rows, c = n - n_rows;
  ConstraintRows out;
  out.c_diag = u.cwiseProduct(u);
  out.c_utri.resize(n, k * (k - 1) / 2);
  Index col = 0;
  for (Index l = 0; l < k; ++l)
    for (Index j = l + 1; j < k; ++j) {
      out.c_utri.col(col++) = u.col(l).cwiseProduct(u.col(j));
      out.utri_pairs.emplace_back(l, j);
    }
  MatrixXd stacked(k + out.c_utri.cols(), r * c);
  for (Index i = 0; i < k; ++i)
    stacked.row(i) = detail::degree_weighted_row(out.c_diag.col(i), r, c).transpose();
  for (Index i = 0; i < out.c_utri.cols(); ++i)
    stacked.row(k + i) = detail::degree_weighted_row(out.c_utri.col(i), r, c).transpose();
  out.kept = independent_rows(stacked);
  return out;
}

struct LinearConstraint {
  MatrixXd coef;  // R x C
  double rhs = 0.0;
};

/// Data of one X step: minimize f(X) + alpha <X, coupling> subject to
/// X >= 0 and <coef_i, X> = rhs_i for every equality constraint.
struct SubproblemSpec {
  MatrixXd coupling;
  std::vector<LinearConstraint> eq_constraints;
  std::optional<double> simplex_rhs;  // when set, the total-mass row is among the candidates

  Index rows() const { return coupling.rows(); }
  Index cols() const { return coupling.cols(); }

  MatrixXd eq_matrix() const {
    MatrixXd a(static_cast<Index>(eq_constraints.size()), coupling.size());
    for (std::size_t i = 0; i < eq_constraints.size(); ++i) {
      const MatrixXd& t = eq_constraints[i].coef;
      for (Index r = 0; r < t.rows(); ++r)
        for (Index c = 0; c < t.cols(); ++c) a(static_cast<Index>(i), r * t.cols() + c) = t(r, c);
    }
    return a;
  }
  VectorXd eq_rhs() const {
    VectorXd b(static_cast<Index>(eq_constraints.size()));
    for (std::size_t i = 0; i < eq_constraints.size(); ++i) b(static_cast<Index>(i)) = eq_constraints[i].rhs;
    return b;
  }
};

/// Builds the X step from an eigenbasis. Candidate rows are the optional
/// total-mass row, then the K diagonal and K(K-1)/2 off-diagonal rows of
/// U^T diag(deg) U = I; dependent rows are pruned.
inline SubproblemSpec build_subproblem(const EigenBasis& basis, const VectorXd& w,
                                       std::optional<double> simplex_rhs = {}) {
  const Index r = basis.n_rows, c = basis.n_cols(), k = basis.k();
  SubproblemSpec spec;
  spec.coupling = coupling_matrix(basis, w);
  spec.simplex_rhs = simplex_rhs;
  const ConstraintRows cr = constraint_rows(basis.u, r);

  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  if (simplex_rhs) {
    rows.push_back(VectorXd::Ones(r * c));
    rhs.push_back(*simplex_rhs);
  }
  for (Index i = 0; i < k; ++i) {
    rows.push_back(detail::degree_weighted_row(cr.c_diag.col(i), r, c));
    rhs.push_back(1.0);
  }
  for (Index i = 0; i < cr.c_utri.cols(); ++i) {
    rows.push_back(detail::degree_weighted_row(cr.c_utri.col(i), r, c));
    rhs.push_back(0.0);
  }
  MatrixXd stacked(static_cast<Index>(rows.size()), r * c);
  for (std::size_t i = 0; i < rows.size(); ++i) stacked.row(static_cast<Index>(i)) = rows[i].transpose();
  for (Index i : independent_rows(stacked)) {
    LinearConstraint lc;
    lc.coef = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        rows[i].data(), r, c);
    lc.rhs = rhs[i];
    spec.eq_constraints.push_back(std::move(lc));
  }
  return spec;
}

/// An objective f together with an X-step solver. solve_subproblem must
/// return a feasible global minimizer of f (or of a surrogate with matching
/// first order behavior at x_current) plus alpha <X, spec.coupling>.
template <class O>
concept ObjectiveOracle = requires(O& o, const MatrixXd& x, const SubproblemSpec& s, double alpha) {
  { o.evaluate(x) } -> std::convertible_to<double>;
  { o.solve_subproblem(s, alpha, x) } -> std::convertible_to<MatrixXd>;
};

struct StoppingRule {
  double rel_tol = 1e-8;
  int max_iter = 500;
};

struct AlternateTrace {
  std::vector<double> objective;  // f(X) + alpha * eigsum(X), one entry per iterate
  std::vector<double> eigsum;
  int iterations = 0;
  bool converged = false;
  bool degree_floor_hit = false;  // some iterate had a degree below 1e-12
  MatrixXd x;
  EigenBasis basis;  // eigenbasis of the final X
};

/// Raised when the X step fails or the iterates lose too many nonzero
/// rows/columns; carries the last feasible state.
struct AlternateError : NumericError {
  AlternateError(const std::string& what, MatrixXd last_x, AlternateTrace trace)
      : NumericError(what), last_x(std::move(last_x)), trace(std::move(trace)) {}
  MatrixXd last_x;
  AlternateTrace trace;
};

namespace detail {
inline void check_degrees(const MatrixXd& x, Index k, AlternateTrace& trace) {
  const VectorXd rs = x.rowwise().sum();
  const VectorXd cs = x.colwise().sum().transpose();
  Index nonzero = 0;
  bool floor_hit = false;
  for (Index i = 0; i < rs.size(); ++i) {
    nonzero += rs(i) > 0.0;
    floor_hit |= rs(i) < 1e-12;
  }
  for (Index i = 0; i < cs.size(); ++i) {
    nonzero += cs(i) > 0.0;
    floor_hit |= cs(i) < 1e-12;
  }
  trace.degree_floor_hit |= floor_hit;
  if (nonzero < k)
    throw AlternateError("iterate has " + std::to_string(nonzero) +
                             " nonzero rows+columns, fewer than k=" + std::to_string(k),
                         x, trace);
}
}  // namespace detail

/// Alternates the eigenbasis step and oracle.solve_subproblem from x0. The
/// recorded objective is nonincreasing when the oracle honors its contract.
/// With alpha == 0 the eigen step is inert and one unconstrained oracle solve
/// is performed.
template <ObjectiveOracle O>
AlternateTrace alternate(O& oracle, const MatrixXd& x0, Index k, const VectorXd& w, double alpha,
                         const StoppingRule& stop = {}, std::optional<double> simplex_rhs = {}) {
  require_nonnegative(x0, "alternate");
  if (!(alpha >= 0.0)) throw ContractError("alternate: alpha must be >= 0");
  if (w.size() != k) throw ShapeError("alternate: weight length must equal k");
  for (Index j = 0; j < w.size(); ++j)
    if (!(w(j) > 0.0)) throw ContractError("alternate: weights must be positive");
  require_nonincreasing_weights(w);

  AlternateTrace trace;
  MatrixXd x = x0;

  if (alpha == 0.0) {
    SubproblemSpec spec;
    spec.coupling = MatrixXd::Zero(x.rows(), x.cols());
    spec.simplex_rhs = simplex_rhs;
    if (simplex_rhs) spec.eq_constraints.push_back({MatrixXd::Ones(x.rows(), x.cols()), *simplex_rhs});
    trace.objective.push_back(oracle.evaluate(x));
    try {
      x = oracle.solve_subproblem(spec, 0.0, x);
    } catch (const NumericError& e) {
      throw AlternateError(e.what(), x, trace);
    }
    trace.objective.push_back(oracle.evaluate(x));
    trace.iterations = 1;
    trace.converged = true;
    trace.x = x;
    trace.basis = smallest_generalized_eigenbasis(x, k, w);
    trace.eigsum.push_back(trace.basis.attained_value);
    return trace;
  }

  detail::check_degrees(x, k, trace);
  EigenBasis basis = smallest_generalized_eigenbasis(x, k, w);
  double obj = oracle.evaluate(x) + alpha * basis.attained_value;
  trace.objective.push_back(obj);
  trace.eigsum.push_back(basis.attained_value);

  for (int it = 0; it < stop.max_iter; ++it) {
    const SubproblemSpec spec = build_subproblem(basis, w, simplex_rhs);
    MatrixXd next;
    try {
      next = oracle.solve_subproblem(spec, alpha, x);
    } catch (const NumericError& e) {
      trace.x = x;
      trace.basis = basis;
      throw AlternateError(e.what(), x, trace);
    }
    x = std::move(next);
    detail::check_degrees(x, k, trace);
    basis = smallest_generalized_eigenbasis(x, k, w);
    const double next_obj = oracle.evaluate(x) + alpha * basis.attained_value;
    trace.objective.push_back(next_obj);
    trace.eigsum.push_back(basis.attained_value);
    trace.iterations = it + 1;
    const bool small = std::abs(obj - next_obj) <= stop.rel_tol * std::max(1.0, std::abs(obj));
    obj = next_obj;
    if (small) {
      trace.converged = true;
      break;
    }
  }
  trace.x = x;
  trace.basis = basis;
  return trace;
}

}  // namespace mvmm
