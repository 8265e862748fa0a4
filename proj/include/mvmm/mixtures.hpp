#pragma once

// Diagonal Gaussian components, per-view densities, weighted MLE updates and
// a plain single-view Gaussian mixture fitted by EM.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/kmeans.hpp"
#include "mvmm/rng.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

struct GaussianDiagComponent {
  VectorXd mean;
  VectorXd variance;

  Index dim() const { return mean.size(); }
};

struct ViewModel {
  std::vector<GaussianDiagComponent> components;

  Index k() const { return static_cast<Index>(components.size()); }
  Index dim() const { return components.empty() ? 0 : components.front().dim(); }
};

inline double log_density(const GaussianDiagComponent& c, const VectorXd& x) {
  if (x.size() != c.dim() || c.variance.size() != c.dim())
    throw ShapeError("log_density: dimension mismatch");
  constexpr double log2pi = 1.8378770664093454836;  // log(2 pi)
  double s = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    const double r = x(j) - c.mean(j);
    s += -0.5 * (log2pi + std::log(c.variance(j))) - 0.5 * r * r / c.variance(j);
  }
  return s;
}

/// n x K matrix of log phi(x_i | component k).
inline MatrixXd log_density_matrix(const ViewModel& v, const MatrixXd& data) {
  if (v.k() > 0 && data.cols() != v.dim()) throw ShapeError("log_density_matrix: dimension mismatch");
  constexpr double log2pi = 1.8378770664093454836;
  MatrixXd out(data.rows(), v.k());
  for (Index k = 0; k < v.k(); ++k) {
    const auto& c = v.components[k];
    const VectorXd prec = c.variance.cwiseInverse();
    const double norm = -0.5 * (c.dim() * log2pi + c.variance.array().log().sum());
    const MatrixXd centered = data.rowwise() - c.mean.transpose();
    out.col(k) = (norm - 0.5 * (centered.array().square().rowwise() * prec.transpose().array()).rowwise().sum())
                     .matrix();
  }
  return out;
}

/// Per-feature variance floor: 1e-6 times the feature's sample variance,
/// never below 1e-10.
inline VectorXd covariance_floor(const MatrixXd& data, double rel = 1e-6) {
  VectorXd f(data.cols());
  const double n = static_cast<double>(data.rows());
  for (Index j = 0; j < data.cols(); ++j) {
    const double mu = data.col(j).mean();
    const double var = n > 0 ? (data.col(j).array() - mu).square().sum() / n : 0.0;
    f(j) = std::max(rel * var, 1e-10);
  }
  return f;
}

struct WeightedUpdate {
  ViewModel model;
  std::vector<bool> frozen;  // component had (numerically) zero total weight
};

/// Weighted means and variances (plus floor) for each column of `weights`.
/// Components whose weight column sums below 1e-300 keep their parameters
/// from `previous`, or the global moments when there is none.
inline WeightedUpdate weighted_mle_update(const MatrixXd& data, const MatrixXd& weights,
                                          const VectorXd& floor, const ViewModel* previous = nullptr) {
  if (weights.rows() != data.rows()) throw ShapeError("weighted_mle_update: row count mismatch");
  if (floor.size() != data.cols()) throw ShapeError("weighted_mle_update: floor length mismatch");
  if (previous && previous->k() != weights.cols())
    throw ShapeError("weighted_mle_update: previous model has the wrong number of components");
  require_nonnegative(weights, "weighted_mle_update");
  const Index k = weights.cols();
  WeightedUpdate out;
  out.model.components.resize(k);
  out.frozen.assign(k, false);
  const VectorXd sums = weights.colwise().sum().transpose();
  const MatrixXd wx = weights.transpose() * data;                    // K x d
  for (Index c = 0; c < k; ++c) {
    auto& comp = out.model.components[c];
    if (!(sums(c) > 1e-300)) {
      out.frozen[c] = true;
      if (previous) {
        comp = previous->components[c];
      } else {
        comp.mean = data.colwise().mean().transpose();
        comp.variance = ((data.rowwise() - comp.mean.transpose()).array().square().colwise().mean().transpose()).matrix() + floor;
      }
      continue;
    }
    comp.mean = wx.row(c).transpose() / sums(c);
    const MatrixXd centered = data.rowwise() - comp.mean.transpose();
    comp.variance = (weights.col(c).transpose() * centered.array().square().matrix()).transpose() / sums(c);
    comp.variance = comp.variance.cwiseMax(0.0) + floor;
  }
  return out;
}

namespace detail {
// Row-wise log-sum-exp; rows that are entirely -inf give -inf. When `probs`
// is given it receives exp(m - lse) row by row.
inline VectorXd logsumexp_rows(const MatrixXd& m, MatrixXd* probs = nullptr) {
  const Index n = m.rows();
  if (m.cols() == 0) return VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  ArrayXd mx = m.col(0).array();
  for (Index t = 1; t < m.cols(); ++t) mx = mx.max(m.col(t).array());
  for (Index i = 0; i < n; ++i)
    if (!std::isfinite(mx(i))) mx(i) = 0.0;
  MatrixXd local;
  MatrixXd& e = probs ? *probs : local;
  e.resize(n, m.cols());
  ArrayXd s = ArrayXd::Zero(n);
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  for (Index t = 0; t < m.cols(); ++t) {
    if (m.col(t).maxCoeff() == ninf) {
      e.col(t).setZero();
      continue;
    }
    // -inf maps to exactly 0
    e.col(t).array() = (m.col(t).array() == ninf).select(0.0, (m.col(t).array() - mx).exp());
    s += e.col(t).array();
  }
  if (probs) {
    const ArrayXd inv = s.inverse();
    for (Index t = 0; t < m.cols(); ++t) e.col(t).array() *= inv;
  }
  return (mx + s.log()).matrix();
}
}  // namespace detail

struct GmmConfig {
  int n_init = 10;
  int max_iter = 300;
  double rel_tol = 1e-8;
  double reg_rel = 1e-6;
  std::uint64_t seed = 0;
};

struct GmmFit {
  ViewModel model;
  VectorXd weights;
  std::vector<double> log_lik;  // one entry per parameter state visited
  int iterations = 0;
  bool converged = false;
};

inline double gmm_log_likelihood(const ViewModel& m, const VectorXd& weights, const MatrixXd& data) {
  MatrixXd lp = log_density_matrix(m, data);
  lp.rowwise() += weights.array().log().matrix().transpose();
  return detail::logsumexp_rows(lp).sum();
}

inline MatrixXd gmm_responsibilities(const ViewModel& m, const VectorXd& weights, const MatrixXd& data,
                                     double* log_lik = nullptr) {
  MatrixXd lp = log_density_matrix(m, data);
  lp.rowwise() += weights.array().log().matrix().transpose();
  MatrixXd g;
  const VectorXd lse = detail::logsumexp_rows(lp, &g);
  if (log_lik) *log_lik = lse.sum();
  return g;
}

inline std::vector<int> gmm_predict(const ViewModel& m, const VectorXd& weights, const MatrixXd& data) {
  const MatrixXd g = gmm_responsibilities(m, weights, data);
  std::vector<int> labels(data.rows());
  for (Index i = 0; i < g.rows(); ++i) {
    Index best;
    g.row(i).maxCoeff(&best);  // first maximum on ties
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

/// Hard assignment initialization: one-hot weights from k-means labels.
inline ViewModel init_from_kmeans(const MatrixXd& data, Index k, const VectorXd& floor, Rng& rng) {
  const KMeansResult km = kmeans(data, k, rng, 1);
  MatrixXd w = MatrixXd::Zero(data.rows(), k);
  for (Index i = 0; i < data.rows(); ++i) w(i, km.labels[i]) = 1.0;
  return weighted_mle_update(data, w, floor).model;
}

/// EM for a diagonal Gaussian mixture; best of n_init k-means++ starts.
inline GmmFit fit_gmm(const MatrixXd& data, Index k, const GmmConfig& cfg = {}) {
  if (k < 1) throw ContractError("fit_gmm: K must be >= 1");
  if (k > data.rows()) throw ContractError("fit_gmm: K exceeds the number of observations");
  const VectorXd floor = covariance_floor(data, cfg.reg_rel);
  GmmFit best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.n_init; ++r) {
    Rng rng = make_rng(cfg.seed, {hash_tag("gmm-init"), static_cast<std::uint64_t>(r)});
    GmmFit fit;
    fit.model = init_from_kmeans(data, k, floor, rng);
    fit.weights = VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    double ll = 0.0;
    MatrixXd g = gmm_responsibilities(fit.model, fit.weights, data, &ll);
    fit.log_lik.push_back(ll);
    for (int it = 0; it < cfg.max_iter; ++it) {
      fit.model = weighted_mle_update(data, g, floor, &fit.model).model;
      fit.weights = g.colwise().mean().transpose();
      fit.weights /= fit.weights.sum();
      double next = 0.0;
      g = gmm_responsibilities(fit.model, fit.weights, data, &next);
      fit.log_lik.push_back(next);
      fit.iterations = it + 1;
      const bool done = std::abs(next - ll) / (std::abs(ll) + 1.0) < cfg.rel_tol;
      ll = next;
      if (done) {
        fit.converged = true;
        break;
      }
    }
    if (ll > best_ll) {
      best_ll = ll;
      best = std::move(fit);
    }
  }
  return best;
}

}  // namespace mvmm
