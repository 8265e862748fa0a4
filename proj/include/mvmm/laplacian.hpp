#pragma once

// Adjacency structures of nonnegative tables, their Laplacians, and the
// permutation invariant block structure they encode.

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

/// [[0, X], [X^T, 0]] for an R x C nonnegative matrix.
inline MatrixXd bipartite_adjacency(const MatrixXd& x) {
  require_nonnegative(x, "bipartite_adjacency");
  const Index r = x.rows(), c = x.cols();
  MatrixXd a = MatrixXd::Zero(r + c, r + c);
  a.topRightCorner(r, c) = x;
  a.bottomLeftCorner(c, r) = x.transpose();
  return a;
}

inline MatrixXd bipartite_adjacency(const NonNegTable& x) {
  if (x.rank() != 2) throw ShapeError("bipartite_adjacency: table must have exactly 2 axes");
  return bipartite_adjacency(x.matrix());
}

/// Adjacency of the V-partite graph whose vertices are the (axis, index)
/// pairs. The weight between (a, i) and (b, j), a != b, is the sum of all
/// entries with axis a fixed at i and axis b fixed at j.
inline MatrixXd multiarray_adjacency(const NonNegTable& x) {
  const Index v = x.rank();
  if (v < 2) throw ShapeError("multiarray_adjacency: need at least 2 axes");
  std::vector<Index> offset(v, 0);
  for (Index a = 1; a < v; ++a) offset[a] = offset[a - 1] + x.shape()[a - 1];
  const Index n = offset[v - 1] + x.shape()[v - 1];
  MatrixXd adj = MatrixXd::Zero(n, n);
  for (Index flat = 0; flat < x.size(); ++flat) {
    const double w = x.values()[flat];
    if (w == 0.0) continue;
    for (Index a = 0; a < v; ++a) {
      const Index ia = offset[a] + x.axis_index(flat, a);
      for (Index b = a + 1; b < v; ++b) {
        const Index ib = offset[b] + x.axis_index(flat, b);
        adj(ia, ib) += w;
        adj(ib, ia) += w;
      }
    }
  }
  return adj;
}

inline VectorXd degrees(const MatrixXd& adjacency) { return adjacency.rowwise().sum(); }

inline MatrixXd unnormalized_laplacian(const MatrixXd& adjacency) {
  MatrixXd l = -adjacency;
  l.diagonal() += degrees(adjacency);
  return l;
}

namespace detail {
// Moore-Penrose convention: zero degrees get a zero reciprocal.
inline VectorXd inv_sqrt_or_zero(const VectorXd& d) {
  VectorXd out(d.size());
  for (Index i = 0; i < d.size(); ++i) out(i) = d(i) > 0.0 ? 1.0 / std::sqrt(d(i)) : 0.0;
  return out;
}
}  // namespace detail

/// I - D^{-1/2} A D^{-1/2}; the diagonal is 1 even for isolated vertices.
inline MatrixXd symmetric_laplacian(const MatrixXd& adjacency) {
  const VectorXd s = detail::inv_sqrt_or_zero(degrees(adjacency));
  MatrixXd l = -(s.asDiagonal() * adjacency * s.asDiagonal());
  l.diagonal().array() += 1.0;
  return l;
}

/// diag(X 1)^{-1/2} X diag(X^T 1)^{-1/2}, pseudo-inverse on zero sums.
inline MatrixXd tsym(const MatrixXd& x) {
  require_nonnegative(x, "tsym");
  const VectorXd rs = detail::inv_sqrt_or_zero(x.rowwise().sum());
  const VectorXd cs = detail::inv_sqrt_or_zero(x.colwise().sum().transpose());
  return rs.asDiagonal() * x * cs.asDiagonal();
}

struct LaplacianBundle {
  MatrixXd adjacency;
  VectorXd degrees;
  MatrixXd l_un;
  MatrixXd l_sym;
  MatrixXd t_sym;  // empty unless the table is a matrix
};

inline LaplacianBundle laplacian_bundle(const NonNegTable& x) {
  LaplacianBundle b;
  b.adjacency = x.rank() == 2 ? bipartite_adjacency(x) : multiarray_adjacency(x);
  b.degrees = degrees(b.adjacency);
  b.l_un = unnormalized_laplacian(b.adjacency);
  b.l_sym = symmetric_laplacian(b.adjacency);
  if (x.rank() == 2) b.t_sym = tsym(x.matrix());
  return b;
}

/// Eigenvalues of a symmetric matrix in ascending order.
inline VectorXd sorted_eigenvalues(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Threshold below which an eigenvalue counts as zero:
/// 1e-10 times the largest eigenvalue magnitude, floored at 1.
inline double zero_eigenvalue_tol(const VectorXd& evals) {
  const double top = evals.size() ? evals.cwiseAbs().maxCoeff() : 0.0;
  return 1e-10 * std::max(1.0, top);
}

inline Index count_below(const VectorXd& evals, double tol) {
  return static_cast<Index>((evals.array() < tol).count());
}

/// Block structure of a table up to axis permutations. For matrices axis 0
/// holds the rows and axis 1 the columns.
struct BlockStructure {
  Index num_blocks = 0;
  bool degenerate = false;  // every entry was below the support tolerance
  double support_tol = 0.0;
  std::vector<std::vector<int>> labels;        // per axis; -1 marks a zero slice
  std::vector<std::vector<Index>> zero_slices;  // per axis
  std::vector<std::vector<Index>> perms;        // per axis; blocks in order, zero slices last

  const std::vector<int>& row_block() const { return labels.at(0); }
  const std::vector<int>& col_block() const { return labels.at(1); }
  const std::vector<Index>& zero_rows() const { return zero_slices.at(0); }
  const std::vector<Index>& zero_cols() const { return zero_slices.at(1); }
  const std::vector<Index>& row_perm() const { return perms.at(0); }
  const std::vector<Index>& col_perm() const { return perms.at(1); }

  Index num_zero_slices() const {
    Index z = 0;
    for (const auto& s : zero_slices) z += static_cast<Index>(s.size());
    return z;
  }
};

/// Default support threshold: 1e-8 times the largest entry.
inline double default_support_tol(double max_entry) { return 1e-8 * max_entry; }

/// Counts blocks exactly with union-find on the support graph. Entries with
/// |value| <= support_tol are treated as zero.
inline BlockStructure count_blocks(const NonNegTable& x, std::optional<double> support_tol = {}) {
  const Index v = x.rank();
  const double tol = support_tol.value_or(default_support_tol(x.max_value()));
  std::vector<Index> offset(v, 0);
  for (Index a = 1; a < v; ++a) offset[a] = offset[a - 1] + x.shape()[a - 1];
  const Index n = offset[v - 1] + x.shape()[v - 1];

  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  std::vector<bool> touched(n, false);
  for (Index flat = 0; flat < x.size(); ++flat) {
    if (!(std::abs(x.values()[flat]) > tol)) continue;
    const Index first = offset[0] + x.axis_index(flat, 0);
    touched[first] = true;
    for (Index a = 1; a < v; ++a) {
      const Index other = offset[a] + x.axis_index(flat, a);
      touched[other] = true;
      const Index ra = find(first), rb = find(other);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }

  BlockStructure bs;
  bs.support_tol = tol;
  bs.labels.resize(v);
  bs.zero_slices.resize(v);
  bs.perms.resize(v);
  std::vector<int> root_label(n, -1);
  int next = 0;
  for (Index a = 0; a < v; ++a) {
    bs.labels[a].assign(x.shape()[a], -1);
    for (Index i = 0; i < x.shape()[a]; ++i) {
      const Index vert = offset[a] + i;
      if (!touched[vert]) {
        bs.zero_slices[a].push_back(i);
        continue;
      }
      const Index root = find(vert);
      if (root_label[root] < 0) root_label[root] = next++;
      bs.labels[a][i] = root_label[root];
    }
  }
  bs.num_blocks = next;
  bs.degenerate = next == 0;
  for (Index a = 0; a < v; ++a) {
    auto& p = bs.perms[a];
    p.resize(x.shape()[a]);
    std::iota(p.begin(), p.end(), Index{0});
    const auto& lab = bs.labels[a];
    std::stable_sort(p.begin(), p.end(), [&](Index i, Index j) {
      const int li = lab[i] < 0 ? next : lab[i];
      const int lj = lab[j] < 0 ? next : lab[j];
      return li < lj;
    });
  }
  return bs;
}

inline BlockStructure count_blocks(const MatrixXd& x, std::optional<double> support_tol = {}) {
  return count_blocks(NonNegTable::from_matrix(x), support_tol);
}

struct SpectrumReport {
  VectorXd sym;  // ascending eigenvalues of the symmetric Laplacian
  VectorXd un;   // ascending eigenvalues of the unnormalized Laplacian
  Index sym_zero_count = 0;
  Index un_zero_count = 0;
};

inline SpectrumReport spectrum_report(const NonNegTable& x) {
  const MatrixXd adj = x.rank() == 2 ? bipartite_adjacency(x) : multiarray_adjacency(x);
  SpectrumReport r;
  r.sym = sorted_eigenvalues(symmetric_laplacian(adj));
  r.un = sorted_eigenvalues(unnormalized_laplacian(adj));
  r.sym_zero_count = count_below(r.sym, zero_eigenvalue_tol(r.sym));
  r.un_zero_count = count_below(r.un, zero_eigenvalue_tol(r.un));
  return r;
}

inline SpectrumReport spectrum_report(const MatrixXd& x) {
  return spectrum_report(NonNegTable::from_matrix(x));
}

}  // namespace mvmm
