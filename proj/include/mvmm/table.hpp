#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvmm/errors.hpp"

namespace mvmm {

using Eigen::ArrayXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline void require_nonnegative(const MatrixXd& x, const char* what) {
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ContractError(std::string(what) + ": entries must be finite and nonnegative");
  }
}

/// Dense nonnegative multi-array stored row-major (last axis fastest).
/// Matrices are the rank-2 case.
class NonNegTable {
 public:
  NonNegTable() = default;

  NonNegTable(std::vector<Index> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_.empty()) throw ShapeError("NonNegTable: shape must have at least one axis");
    for (Index d : shape_)
      if (d < 1) throw ShapeError("NonNegTable: axis lengths must be >= 1");
    const Index n = std::accumulate(shape_.begin(), shape_.end(), Index{1}, std::multiplies<>());
    if (static_cast<Index>(values_.size()) != n)
      throw ShapeError("NonNegTable: value count does not match shape");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ContractError("NonNegTable: entries must be finite and nonnegative");
    strides_.assign(shape_.size(), 1);
    for (Index a = static_cast<Index>(shape_.size()) - 2; a >= 0; --a)
      strides_[a] = strides_[a + 1] * shape_[a + 1];
  }

  static NonNegTable from_matrix(const MatrixXd& x) {
    std::vector<double> v(static_cast<std::size_t>(x.size()));
    for (Index r = 0; r < x.rows(); ++r)
      for (Index c = 0; c < x.cols(); ++c) v[r * x.cols() + c] = x(r, c);
    return NonNegTable({x.rows(), x.cols()}, std::move(v));
  }

  Index rank() const { return static_cast<Index>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }
  const std::vector<double>& values() const { return values_; }
  Index size() const { return static_cast<Index>(values_.size()); }
  Index stride(Index axis) const { return strides_[axis]; }

  double max_value() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
  }

  // Index along `axis` of the entry at flat position `flat`.
  Index axis_index(Index flat, Index axis) const { return (flat / strides_[axis]) % shape_[axis]; }

  double at(std::span<const Index> idx) const {
    Index flat = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) flat += idx[a] * strides_[a];
    return values_[flat];
  }

  MatrixXd matrix() const {
    if (rank() != 2) throw ShapeError("NonNegTable: expected a 2-axis table");
    MatrixXd x(shape_[0], shape_[1]);
    for (Index r = 0; r < shape_[0]; ++r)
      for (Index c = 0; c < shape_[1]; ++c) x(r, c) = values_[r * shape_[1] + c];
    return x;
  }

 private:
  std::vector<Index> shape_;
  std::vector<Index> strides_;
  std::vector<double> values_;
};

}  // namespace mvmm
