#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's own solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "mvmm/mvmm.hpp"

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A matrix with `blocks` planted dense blocks, optional zero rows/cols and
/// random row/column permutations.
struct Planted {
  MatrixXd x;
  Index blocks = 0;
  Index zero_rows = 0;
  Index zero_cols = 0;
};

inline Planted planted_blocks(mvmm::Rng& rng, Index max_dim = 30, bool allow_zero_lines = true) {
  std::uniform_int_distribution<Index> dim(1, max_dim);
  std::uniform_real_distribution<double> val(0.1, 1.0);
  std::bernoulli_distribution coin(0.5);
  Planted p;
  const Index r = dim(rng), c = dim(rng);
  p.zero_rows = allow_zero_lines && coin(rng) && r > 1 ? std::uniform_int_distribution<Index>(0, (r - 1) / 3)(rng) : 0;
  p.zero_cols = allow_zero_lines && coin(rng) && c > 1 ? std::uniform_int_distribution<Index>(0, (c - 1) / 3)(rng) : 0;
  const Index ur = r - p.zero_rows, uc = c - p.zero_cols;
  p.blocks = std::uniform_int_distribution<Index>(1, std::min(ur, uc))(rng);
  // every block gets one row and one column, the rest are assigned at random
  std::vector<Index> rb(ur), cb(uc);
  for (Index i = 0; i < ur; ++i) rb[i] = i < p.blocks ? i : std::uniform_int_distribution<Index>(0, p.blocks - 1)(rng);
  for (Index j = 0; j < uc; ++j) cb[j] = j < p.blocks ? j : std::uniform_int_distribution<Index>(0, p.blocks - 1)(rng);
  MatrixXd x = MatrixXd::Zero(r, c);
  for (Index i = 0; i < ur; ++i)
    for (Index j = 0; j < uc; ++j)
      if (rb[i] == cb[j]) x(i, j) = val(rng);
  std::vector<Index> pr(r), pc(c);
  std::iota(pr.begin(), pr.end(), Index{0});
  std::iota(pc.begin(), pc.end(), Index{0});
  std::shuffle(pr.begin(), pr.end(), rng);
  std::shuffle(pc.begin(), pc.end(), rng);
  p.x.resize(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) p.x(pr[i], pc[j]) = x(i, j);
  return p;
}

/// Dense (R+C) x (R+C) Laplacian pieces built entry by entry.
inline MatrixXd dense_bipartite_adjacency(const MatrixXd& x) {
  const Index r = x.rows(), c = x.cols();
  MatrixXd a = MatrixXd::Zero(r + c, r + c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) a(i, r + j) = a(r + j, i) = x(i, j);
  return a;
}

/// min Tr(U^T L_un U diag(w)) s.t. U^T diag(deg) U = I, from a dense
/// generalized eigensolver on the vertices with positive degree.
inline double dense_geig_optimum(const MatrixXd& x, const VectorXd& w) {
  const MatrixXd a = dense_bipartite_adjacency(x);
  const VectorXd deg = a.rowwise().sum();
  std::vector<Index> keep;
  for (Index i = 0; i < deg.size(); ++i)
    if (deg(i) > 0.0) keep.push_back(i);
  const Index m = static_cast<Index>(keep.size());
  MatrixXd l(m, m), d = MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    d(i, i) = deg(keep[i]);
    for (Index j = 0; j < m; ++j) l(i, j) = (i == j ? deg(keep[i]) : 0.0) - a(keep[i], keep[j]);
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(l, d);
  const VectorXd ev = es.eigenvalues();  // ascending
  return w.dot(ev.head(w.size()));
}

inline double log_sparsity_objective(const VectorXd& z, const VectorXd& a, double lambda, double delta) {
  double s = 0.0;
  for (Index k = 0; k < z.size(); ++k) s += -a(k) * std::log(z(k)) + lambda * std::log(delta + z(k));
  return s;
}

/// Global minimizer of -sum a log z + lambda sum log(delta + z) on the
/// simplex, for a > 0. Every KKT point has z > 0 and, for multiplier eta,
/// z_k(eta) is the positive root of eta z^2 + (eta delta - a + lambda) z - a delta.
/// All eta with sum z(eta) = 1 are bracketed on a log grid and refined by
/// bisection; the KKT point with the lowest objective is returned.
inline VectorXd log_sparsity_minimizer(const VectorXd& a, double lambda, double delta) {
  auto z_of = [&](double eta) {
    VectorXd z(a.size());
    for (Index k = 0; k < a.size(); ++k) {
      const double b = eta * delta - a(k) + lambda;
      const double disc = std::sqrt(b * b + 4.0 * eta * a(k) * delta);
      // numerically stable positive root of eta z^2 + b z - a delta
      z(k) = b <= 0.0 ? (-b + disc) / (2.0 * eta) : (2.0 * a(k) * delta) / (b + disc);
    }
    return z;
  };
  auto excess = [&](double eta) { return z_of(eta).sum() - 1.0; };
  const int grid = 4000;
  const double lo = 1e-8, hi = 1e8;
  VectorXd best;
  double best_obj = std::numeric_limits<double>::infinity();
  double prev_eta = lo, prev_f = excess(lo);
  for (int g = 1; g <= grid; ++g) {
    const double eta = lo * std::pow(hi / lo, static_cast<double>(g) / grid);
    const double f = excess(eta);
    if ((prev_f > 0.0) != (f > 0.0)) {
      double l = prev_eta, h = eta, fl = prev_f;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (l + h);
        const double fm = excess(mid);
        if ((fm > 0.0) == (fl > 0.0)) {
          l = mid;
          fl = fm;
        } else {
          h = mid;
        }
      }
      VectorXd z = z_of(0.5 * (l + h));
      z /= z.sum();
      const double obj = log_sparsity_objective(z, a, lambda, delta);
      if (obj < best_obj) {
        best_obj = obj;
        best = z;
      }
    }
    prev_eta = eta;
    prev_f = f;
  }
  return best;
}

/// Golden-section minimizer of a unimodal function on [lo, hi].
template <class F>
double golden_section(F&& f, double lo, double hi, int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Minimum cost assignment (Hungarian algorithm); result[i] = column of row i.
inline std::vector<Index> assignment(const MatrixXd& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("assignment: square cost matrix required");
  const double inf = std::numeric_limits<double>::infinity();
  VectorXd u = VectorXd::Zero(n + 1), v = VectorXd::Zero(n + 1);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    VectorXd minv = VectorXd::Constant(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u(i0) - v(j);
        if (cur < minv(j)) {
          minv(j) = cur;
          way[j] = j0;
        }
        if (minv(j) < delta) {
          delta = minv(j);
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u(p[j]) += delta;
          v(j) -= delta;
        } else {
          minv(j) -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<Index> out(n);
  for (Index j = 1; j <= n; ++j) out[p[j] - 1] = j - 1;
  return out;
}

/// For each fitted component of one view, the true component it is matched
/// to (minimum total squared distance between means).
inline std::vector<Index> match_components(const mvmm::ViewModel& fitted, const mvmm::ViewModel& truth) {
  const Index k = fitted.k();
  MatrixXd cost(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) cost(i, j) = (fitted.components[i].mean - truth.components[j].mean).squaredNorm();
  return assignment(cost);
}

/// Fitted table with its rows and columns relabelled to the true components.
inline MatrixXd align_to_truth(const MatrixXd& fitted_table, const mvmm::MvmmModel& fitted, const mvmm::MvmmModel& truth) {
  const auto rm = match_components(fitted.views[0], truth.views[0]);
  const auto cm = match_components(fitted.views[1], truth.views[1]);
  MatrixXd out(fitted_table.rows(), fitted_table.cols());
  for (Index i = 0; i < fitted_table.rows(); ++i)
    for (Index j = 0; j < fitted_table.cols(); ++j) out(rm[i], cm[j]) = fitted_table(i, j);
  return out;
}

/// ARI straight from the pair-counting definition (O(n^2)).
inline double pair_count_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double expected = in_a * in_b / pairs;
  const double max_idx = 0.5 * (in_a + in_b);
  if (max_idx == expected) return 1.0;
  return (both - expected) / (max_idx - expected);
}

/// Random point on the simplex with all entries positive.
inline VectorXd random_simplex(mvmm::Rng& rng, Index k, double min_entry = 0.0) {
  std::exponential_distribution<double> e(1.0);
  VectorXd a(k);
  for (Index i = 0; i < k; ++i) a(i) = e(rng) + min_entry;
  return a / a.sum();
}

}  // namespace oracle
