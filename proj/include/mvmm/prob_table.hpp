#pragma once

// Joint cluster membership probabilities over per-view label tuples.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

class ProbTable {
 public:
  ProbTable() = default;

  /// Values are row-major over `shape` (last axis fastest). Throws unless
  /// the entries are nonnegative and sum to 1 within 1e-10.
  ProbTable(std::vector<Index> shape, VectorXd values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_.empty()) throw ShapeError("ProbTable: need at least one axis");
    for (Index k : shape_)
      if (k < 1) throw ShapeError("ProbTable: axis lengths must be >= 1");
    if (values_.size() != cells()) throw ShapeError("ProbTable: value count does not match shape");
    require_nonnegative(values_, "ProbTable");
    const double s = values_.sum();
    if (std::abs(s - 1.0) > 1e-10)
      throw ContractError("ProbTable: entries sum to " + std::to_string(s) + ", expected 1");
  }

  static ProbTable uniform(std::vector<Index> shape) {
    const Index n = std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
    return ProbTable(std::move(shape), VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  }

  /// Normalizes nonnegative weights with a positive total.
  static ProbTable normalized(std::vector<Index> shape, VectorXd w) {
    require_nonnegative(w, "ProbTable::normalized");
    const double s = w.sum();
    if (!(s > 0.0)) throw ContractError("ProbTable::normalized: weights sum to zero");
    w /= s;
    w /= w.sum();
    return ProbTable(std::move(shape), std::move(w));
  }

  static ProbTable from_matrix(const MatrixXd& m) {
    VectorXd v(m.size());
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
    return ProbTable({m.rows(), m.cols()}, std::move(v));
  }

  const std::vector<Index>& shape() const { return shape_; }
  const VectorXd& values() const { return values_; }
  Index num_views() const { return static_cast<Index>(shape_.size()); }
  Index cells() const {
    return std::accumulate(shape_.begin(), shape_.end(), Index{1}, std::multiplies<>());
  }
  double operator[](Index flat) const { return values_(flat); }

  Index stride(Index axis) const {
    Index s = 1;
    for (Index a = num_views() - 1; a > axis; --a) s *= shape_[a];
    return s;
  }
  Index axis_index(Index flat, Index axis) const { return (flat / stride(axis)) % shape_[axis]; }

  /// Marginal over every axis except `axis`.
  VectorXd marginal(Index axis) const {
    VectorXd m = VectorXd::Zero(shape_.at(axis));
    for (Index t = 0; t < values_.size(); ++t) m(axis_index(t, axis)) += values_(t);
    return m;
  }

  MatrixXd matrix() const {
    if (num_views() != 2) throw ShapeError("ProbTable: expected two views");
    MatrixXd m(shape_[0], shape_[1]);
    for (Index r = 0; r < shape_[0]; ++r)
      for (Index c = 0; c < shape_[1]; ++c) m(r, c) = values_(r * shape_[1] + c);
    return m;
  }

  NonNegTable table() const {
    return NonNegTable(shape_, std::vector<double>(values_.data(), values_.data() + values_.size()));
  }

  Index support_size(double tol = 0.0) const { return static_cast<Index>((values_.array() > tol).count()); }

  /// True when every view marginal is strictly positive.
  bool marginals_positive() const {
    for (Index a = 0; a < num_views(); ++a)
      if (!(marginal(a).minCoeff() > 0.0)) return false;
    return true;
  }

 private:
  std::vector<Index> shape_;
  VectorXd values_;
};

}  // namespace mvmm
