#pragma once

// Smallest generalized eigenvectors of (L_un(A_bp(X)), diag(deg(A_bp(X))))
// computed from the SVD of the R x C matrix tsym(X) instead of an
// (R+C) x (R+C) eigendecomposition.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/laplacian.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

struct EigenBasis {
  MatrixXd u;             // (R+C) x K, rows first then columns
  VectorXd eigenvalues;   // the K smallest generalized eigenvalues, ascending
  double attained_value = 0.0;  // sum_j w_j * eigenvalues(j)
  Index n_rows = 0;       // R

  Index k() const { return u.cols(); }
  Index n_cols() const { return u.rows() - n_rows; }
};

inline void require_nonincreasing_weights(const VectorXd& w) {
  for (Index j = 0; j < w.size(); ++j) {
    if (!(w(j) >= 0.0)) throw ContractError("weights must be nonnegative");
    if (j > 0 && w(j) > w(j - 1)) throw ContractError("weights must be nonincreasing");
  }
}

namespace detail {

struct ReducedTable {
  std::vector<Index> rows, cols;  // indices of nonzero rows / columns
  MatrixXd x;
};

inline ReducedTable drop_zero_lines(const MatrixXd& x) {
  ReducedTable r;
  const VectorXd rs = x.rowwise().sum();
  const VectorXd cs = x.colwise().sum().transpose();
  for (Index i = 0; i < x.rows(); ++i)
    if (rs(i) > 0.0) r.rows.push_back(i);
  for (Index j = 0; j < x.cols(); ++j)
    if (cs(j) > 0.0) r.cols.push_back(j);
  r.x.resize(static_cast<Index>(r.rows.size()), static_cast<Index>(r.cols.size()));
  for (Index i = 0; i < r.x.rows(); ++i)
    for (Index j = 0; j < r.x.cols(); ++j) r.x(i, j) = x(r.rows[i], r.cols[j]);
  return r;
}

inline void check_k(Index k, const ReducedTable& r) {
  const Index avail = r.x.rows() + r.x.cols();
  if (k < 1 || k > avail)
    throw ContractError("requested " + std::to_string(k) +
                        " eigenvectors but the table has only " + std::to_string(r.x.rows()) +
                        " nonzero rows and " + std::to_string(r.x.cols()) + " nonzero columns");
}

// Smallest generalized eigenvalues of a table without zero lines, from its
// singular values: 1 - s_j, then 1 (|R - C| times), then 1 + s_(j).
inline VectorXd eigenvalues_from_singular(const VectorXd& s, Index r, Index c, Index k) {
  const Index m = std::min(r, c), big = std::max(r, c);
  VectorXd out(k);
  for (Index j = 0; j < k; ++j) {
    if (j < m)
      out(j) = 1.0 - s(j);
    else if (j < big)
      out(j) = 1.0;
    else
      out(j) = 1.0 + s(m - 1 - (j - big));
  }
  return out;
}

inline VectorXd resolve_weights(const VectorXd& w, Index k) {
  if (w.size() == 0) return VectorXd::Ones(k);
  if (w.size() != k) throw ShapeError("weight vector length must equal k");
  require_nonincreasing_weights(w);
  return w;
}

}  // namespace detail

/// Minimizer of Tr(U^T L_un U diag(w)) subject to U^T diag(deg) U = I_k.
/// Zero rows/columns of X are removed, solved for, and padded back with
/// zero rows. Among tied singular values any orthonormal basis is returned.
inline EigenBasis smallest_generalized_eigenbasis(const MatrixXd& x, Index k,
                                                  const VectorXd& w = VectorXd()) {
  require_nonnegative(x, "smallest_generalized_eigenbasis");
  const detail::ReducedTable red = detail::drop_zero_lines(x);
  detail::check_k(k, red);
  const VectorXd wk = detail::resolve_weights(w, k);

  const Index r = red.x.rows(), c = red.x.cols();
  const Index m = std::min(r, c), big = std::max(r, c);
  const MatrixXd t = tsym(red.x);
  Eigen::JacobiSVD<MatrixXd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const MatrixXd& ul = svd.matrixU();  // r x m
  const MatrixXd& ur = svd.matrixV();  // c x m
  const VectorXd& s = svd.singularValues();

  // Orthonormal completion of the longer side's singular vectors.
  MatrixXd q;
  if (big > m) {
    const MatrixXd& thin = r >= c ? ul : ur;
    Eigen::HouseholderQR<MatrixXd> qr(thin);
    const MatrixXd full = qr.householderQ() * MatrixXd::Identity(big, big);
    q = full.rightCols(big - m);
  }

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  MatrixXd xi = MatrixXd::Zero(r + c, k);
  for (Index j = 0; j < k; ++j) {
    if (j < m) {
      xi.col(j).head(r) = inv_sqrt2 * ul.col(j);
      xi.col(j).tail(c) = inv_sqrt2 * ur.col(j);
    } else if (j < big) {
      if (r >= c)
        xi.col(j).head(r) = q.col(j - m);
      else
        xi.col(j).tail(c) = q.col(j - m);
    } else {
      const Index sv = m - 1 - (j - big);  // j-th smallest singular value
      xi.col(j).head(r) = inv_sqrt2 * ul.col(sv);
      xi.col(j).tail(c) = -inv_sqrt2 * ur.col(sv);
    }
  }

  VectorXd deg(r + c);
  deg.head(r) = red.x.rowwise().sum();
  deg.tail(c) = red.x.colwise().sum().transpose();
  const VectorXd scale = detail::inv_sqrt_or_zero(deg);

  EigenBasis out;
  out.n_rows = x.rows();
  out.u = MatrixXd::Zero(x.rows() + x.cols(), k);
  for (Index i = 0; i < r; ++i) out.u.row(red.rows[i]) = scale(i) * xi.row(i);
  for (Index j = 0; j < c; ++j) out.u.row(x.rows() + red.cols[j]) = scale(r + j) * xi.row(r + j);
  out.eigenvalues = detail::eigenvalues_from_singular(s, r, c, k);
  out.attained_value = wk.dot(out.eigenvalues);
  return out;
}

/// sum_j w_j lambda_(j)(L_sym(A_bp(X))) computed as sum_j w_j (1 - sigma_j(tsym(X)))
/// (with the degenerate-case extension for zero rows/columns).
inline double weighted_eigsum(const MatrixXd& x, const VectorXd& w) {
  require_nonnegative(x, "weighted_eigsum");
  require_nonincreasing_weights(w);
  const detail::ReducedTable red = detail::drop_zero_lines(x);
  detail::check_k(w.size(), red);
  const VectorXd s = Eigen::JacobiSVD<MatrixXd>(tsym(red.x)).singularValues();
  return w.dot(detail::eigenvalues_from_singular(s, red.x.rows(), red.x.cols(), w.size()));
}

/// Generalized eigenvalues of (a, b) for PSD b with ker(b) inside ker(a):
/// the eigenvalues of b^{-1/2} a b^{-1/2} restricted to range(b), ascending.
inline VectorXd generalized_eigenvalues(const MatrixXd& a, const MatrixXd& b, double tol = 1e-10) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw ShapeError("generalized_eigenvalues: square matrices of equal size required");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eb(b);
  const VectorXd& lam = eb.eigenvalues();
  const double top = lam.size() ? std::max(1.0, lam.cwiseAbs().maxCoeff()) : 1.0;
  std::vector<Index> range, kernel;
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -tol * top) throw ContractError("generalized_eigenvalues: b is not PSD");
    (lam(i) > tol * top ? range : kernel).push_back(i);
  }
  const double ascale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Index i : kernel)
    if ((a * eb.eigenvectors().col(i)).norm() > 1e-8 * ascale)
      throw ContractError("generalized_eigenvalues: ker(b) is not contained in ker(a)");
  const Index m = static_cast<Index>(range.size());
  MatrixXd basis(a.rows(), m);
  for (Index j = 0; j < m; ++j)
    basis.col(j) = eb.eigenvectors().col(range[j]) / std::sqrt(lam(range[j]));
  const MatrixXd reduced = basis.transpose() * a * basis;
  return sorted_eigenvalues(0.5 * (reduced + reduced.transpose()));
}

}  // namespace mvmm
