#pragma once

// Log-barrier interior-point method for
//
//   minimize  sum_j phi_j(x_j)   subject to  A x = b,  x >= 0
//
// with smooth convex phi_j. The Hessian of the barrier objective is
// diagonal, so each Newton step reduces to a p x p solve where p is the
// number of equality rows.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <utility>

#include "mvmm/errors.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

template <class F>
concept SeparableObjective = requires(const F& f, Index j, double x) {
  { f.size() } -> std::convertible_to<Index>;
  { f.value(j, x) } -> std::convertible_to<double>;
  { f.grad(j, x) } -> std::convertible_to<double>;
  { f.hess(j, x) } -> std::convertible_to<double>;
};

struct BarrierSettings {
  double mu0 = 1e-4;
  double mu_factor = 0.2;
  double mu_min = 1e-10;
  double newton_tol = 1e-10;  // infinity norm of the Newton residual
  int max_newton = 200;       // per barrier round
};

struct KktResiduals {
  double stationarity = 0.0;     // |grad phi + A^T nu - z|_inf
  double primal = 0.0;           // |A x - b|_inf
  double complementarity = 0.0;  // max_j x_j z_j
  double dual_feasibility = 0.0; // max_j (-z_j)_+

  double max() const {
    return std::max({stationarity, primal, complementarity, dual_feasibility});
  }
};

/// Newton made no progress; carries the best iterate reached.
struct BarrierStall : NumericError {
  BarrierStall(const std::string& what, VectorXd best) : NumericError(what), best(std::move(best)) {}
  VectorXd best;
};

struct BarrierResult {
  VectorXd x;
  VectorXd nu;  // equality multipliers
  VectorXd z;   // bound multipliers, mu / x
  double mu = 0.0;
  int newton_steps = 0;
  bool converged = false;
  KktResiduals kkt;
};

template <SeparableObjective F>
KktResiduals kkt_residuals(const F& f, const MatrixXd& a, const VectorXd& b, const VectorXd& x,
                           const VectorXd& nu, const VectorXd& z) {
  KktResiduals k;
  VectorXd g(x.size());
  for (Index j = 0; j < x.size(); ++j) g(j) = f.grad(j, x(j));
  if (a.rows() > 0) {
    k.stationarity = (g + a.transpose() * nu - z).cwiseAbs().maxCoeff();
    k.primal = (a * x - b).cwiseAbs().maxCoeff();
  } else {
    k.stationarity = (g - z).cwiseAbs().maxCoeff();
  }
  k.complementarity = x.cwiseProduct(z).cwiseAbs().maxCoeff();
  k.dual_feasibility = std::max(0.0, -z.minCoeff());
  return k;
}

namespace detail {

template <SeparableObjective F>
struct BarrierState {
  const F& f;
  const MatrixXd& a;
  const VectorXd& b;
  double mu;

  VectorXd grad(const VectorXd& x) const {
    VectorXd g(x.size());
    for (Index j = 0; j < x.size(); ++j) g(j) = f.grad(j, x(j)) - mu / x(j);
    return g;
  }
  VectorXd hess(const VectorXd& x) const {
    VectorXd h(x.size());
    for (Index j = 0; j < x.size(); ++j)
      h(j) = std::max(f.hess(j, x(j)), 0.0) + mu / (x(j) * x(j));
    return h;
  }
  double residual(const VectorXd& x, const VectorXd& nu) const {
    VectorXd rd = grad(x);
    double rp = 0.0;
    if (a.rows() > 0) {
      rd += a.transpose() * nu;
      rp = (a * x - b).cwiseAbs().maxCoeff();
    }
    return std::max(rd.cwiseAbs().maxCoeff(), rp);
  }
  // Euclidean norm of the full residual, used as the line search merit.
  double merit(const VectorXd& x, const VectorXd& nu) const {
    VectorXd rd = grad(x);
    double rp = 0.0;
    if (a.rows() > 0) {
      rd += a.transpose() * nu;
      rp = (a * x - b).squaredNorm();
    }
    return std::sqrt(rd.squaredNorm() + rp);
  }
};

}  // namespace detail

/// Follows the central path from `x0` (any strictly positive point; it need
/// not satisfy the equalities) down to mu < settings.mu_min. Rows of `a`
/// must be linearly independent. Throws NumericError if Newton stalls with a
/// residual far above tolerance.
template <SeparableObjective F>
BarrierResult solve_separable_barrier(const F& f, const MatrixXd& a_in, const VectorXd& b_in,
                                      VectorXd x0, const BarrierSettings& settings = {}) {
  const Index n = f.size();
  if (x0.size() != n) throw ShapeError("solve_separable_barrier: start point has wrong size");
  if (a_in.rows() > 0 && (a_in.cols() != n || b_in.size() != a_in.rows()))
    throw ShapeError("solve_separable_barrier: constraint dimensions mismatch");
  const double floor = 1e-6 * std::max(x0.cwiseAbs().maxCoeff(), 1e-3);
  for (Index j = 0; j < n; ++j)
    if (!(x0(j) > floor)) x0(j) = floor;

  // The equalities are replaced by the equivalent orthonormal system
  // Q^T x = S^-1 P^T b from the SVD P S Q^T of the row-normalized matrix;
  // multipliers are mapped back at the end.
  VectorXd row_norm = VectorXd::Ones(a_in.rows());
  for (Index i = 0; i < a_in.rows(); ++i) {
    row_norm(i) = a_in.row(i).norm();
    if (!(row_norm(i) > 0.0)) throw ContractError("solve_separable_barrier: zero constraint row");
  }
  MatrixXd a, back;  // back maps multipliers of `a` to multipliers of a_in
  VectorXd b;
  if (a_in.rows() > 0) {
    const MatrixXd an = row_norm.cwiseInverse().asDiagonal() * a_in;
    Eigen::JacobiSVD<MatrixXd> svd(an, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    Index r = 0;
    while (r < sv.size() && sv(r) > 1e-13 * sv(0)) ++r;
    a = svd.matrixV().leftCols(r).transpose();
    const VectorXd sinv = sv.head(r).cwiseInverse();
    b = sinv.asDiagonal() * (svd.matrixU().leftCols(r).transpose() * b_in.cwiseQuotient(row_norm));
    back = row_norm.cwiseInverse().asDiagonal() * svd.matrixU().leftCols(r) * sinv.asDiagonal();
  } else {
    a.resize(0, n);
    b.resize(0);
    back.resize(0, 0);
  }

  BarrierResult out;
  VectorXd x = std::move(x0);
  VectorXd nu = VectorXd::Zero(a.rows());
  double mu = settings.mu0;
  const Index p = a.rows();

  while (true) {
    detail::BarrierState<F> st{f, a, b, mu};
    double res = st.residual(x, nu);
    int it = 0;
    for (; it < settings.max_newton && res > settings.newton_tol; ++it) {
      const VectorXd g = st.grad(x);
      const VectorXd hinv = st.hess(x).cwiseInverse();
      VectorXd dx, dnu;
      if (p > 0) {
        const MatrixXd ah = a * hinv.asDiagonal();
        const MatrixXd s = ah * a.transpose();
        const VectorXd rhs = (a * x - b) - ah * g;
        Eigen::LDLT<MatrixXd> ldlt(s);
        VectorXd nu_plus = ldlt.solve(rhs);
        if (ldlt.info() != Eigen::Success || !nu_plus.allFinite())
          nu_plus = s.completeOrthogonalDecomposition().solve(rhs);
        dx = -hinv.cwiseProduct(g + a.transpose() * nu_plus);
        dnu = nu_plus - nu;
      } else {
        dx = -hinv.cwiseProduct(g);
        dnu = VectorXd();
      }
      double t = 1.0;
      for (Index j = 0; j < n; ++j)
        if (dx(j) < 0.0) t = std::min(t, -0.99 * x(j) / dx(j));
      const double m0 = st.merit(x, nu);
      double trial = std::numeric_limits<double>::infinity();
      VectorXd xn, nun;
      for (int ls = 0; ls < 60; ++ls) {
        xn = x + t * dx;
        nun = p > 0 ? VectorXd(nu + t * dnu) : nu;
        trial = st.merit(xn, nun);
        if (trial <= (1.0 - 0.01 * t) * m0) break;
        t *= 0.5;
      }
      if (!(trial < m0)) break;  // no progress possible at this precision
      x = std::move(xn);
      nu = std::move(nun);
      res = st.residual(x, nu);
    }
    out.newton_steps += it;
    if (!(res <= 1e-6))
      throw BarrierStall("barrier Newton iteration stalled at mu=" + std::to_string(mu) +
                             " with residual " + std::to_string(res),
                         x);
    out.converged = res <= settings.newton_tol;
    if (mu < settings.mu_min) break;
    mu *= settings.mu_factor;
  }

  out.x = x;
  out.nu = a_in.rows() > 0 ? VectorXd(back * nu) : VectorXd();
  out.mu = mu;
  out.z = x.cwiseInverse() * mu;
  out.kkt = kkt_residuals(f, a_in, b_in, out.x, out.nu, out.z);
  return out;
}

}  // namespace mvmm
