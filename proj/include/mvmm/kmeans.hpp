#pragma once

// Lloyd's k-means with k-means++ seeding.

#include <Eigen/Dense>

#include <limits>
#include <random>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/rng.hpp"
#include "mvmm/table.hpp"

namespace mvmm {

struct KMeansResult {
  MatrixXd centers;  // k x d
  std::vector<int> labels;
  double inertia = 0.0;
};

inline MatrixXd kmeans_pp_seed(const MatrixXd& x, Index k, Rng& rng) {
  const Index n = x.rows();
  MatrixXd centers(k, x.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index chosen = 0;
    if (total > 0.0) {
      double target = unif(rng) * total;
      for (chosen = 0; chosen < n - 1; ++chosen) {
        target -= d2(chosen);
        if (target < 0.0) break;
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

inline KMeansResult lloyd(const MatrixXd& x, MatrixXd centers, int max_iter = 300) {
  const Index n = x.rows(), k = centers.rows();
  KMeansResult r;
  r.labels.assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    r.inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      r.inertia += bd;
      if (r.labels[i] != best) {
        r.labels[i] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    MatrixXd sums = MatrixXd::Zero(k, x.cols());
    VectorXd counts = VectorXd::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(r.labels[i]) += x.row(i);
      counts(r.labels[i]) += 1.0;
    }
    for (Index c = 0; c < k; ++c)
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);  // empty clusters keep their center
  }
  r.centers = std::move(centers);
  return r;
}

/// Best of n_init k-means++ seeded Lloyd runs by inertia.
inline KMeansResult kmeans(const MatrixXd& x, Index k, Rng& rng, int n_init = 10, int max_iter = 300) {
  if (k < 1 || k > x.rows()) throw ContractError("kmeans: need 1 <= k <= number of points");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < n_init; ++r) {
    KMeansResult cur = lloyd(x, kmeans_pp_seed(x, k, rng), max_iter);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

}  // namespace mvmm
