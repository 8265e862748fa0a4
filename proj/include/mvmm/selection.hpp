#pragma once

// BIC model selection, adjusted Rand index and the bipartite spectral
// co-clustering baseline.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mvmm/errors.hpp"
#include "mvmm/kmeans.hpp"
#include "mvmm/laplacian.hpp"
#include "mvmm/mvmm_core.hpp"
#include "mvmm/parallel.hpp"
#include "mvmm/rng.hpp"

namespace mvmm {

/// 2 log_lik - (dof_theta + support_size - 1) log n. Larger is better.
inline double bic(double log_lik, Index dof_theta, Index support_size, Index n) {
  if (n < 1) throw ContractError("bic: n must be >= 1");
  return 2.0 * log_lik - static_cast<double>(dof_theta + support_size - 1) * std::log(static_cast<double>(n));
}

/// Free cluster parameters of diagonal Gaussians: sum_v K_v * 2 d_v.
inline Index dof_diag_gaussian(const MvmmModel& m) {
  Index dof = 0;
  for (const auto& v : m.views) dof += v.k() * 2 * v.dim();
  return dof;
}

inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ShapeError("ari: label vectors differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> cont;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cont[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double idx = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : cont) idx += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_idx = 0.5 * (sa + sb);
  if (max_idx == expected) return idx == expected ? 1.0 : 0.0;
  return (idx - expected) / (max_idx - expected);
}

struct CoClustering {
  std::vector<int> row_labels;
  std::vector<int> col_labels;
};

/// Embeds rows and columns with the top-b singular vectors of tsym(pi_hat),
/// scaled by deg^{-1/2}, and clusters the stacked embedding with k-means
/// (10 k-means++ restarts).
inline CoClustering bipartite_spectral_coclustering(const MatrixXd& pi_hat, Index b, std::uint64_t seed = 0) {
  require_nonnegative(pi_hat, "bipartite_spectral_coclustering");
  const Index r = pi_hat.rows(), c = pi_hat.cols();
  if (b < 1 || b > std::min(r, c)) throw ContractError("bipartite_spectral_coclustering: need 1 <= b <= min(R, C)");
  CoClustering out;
  if (b == 1) {
    out.row_labels.assign(r, 0);
    out.col_labels.assign(c, 0);
    return out;
  }
  Eigen::JacobiSVD<MatrixXd> svd(tsym(pi_hat), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd dr = detail::inv_sqrt_or_zero(pi_hat.rowwise().sum());
  const VectorXd dc = detail::inv_sqrt_or_zero(pi_hat.colwise().sum().transpose());
  MatrixXd z(r + c, b);
  z.topRows(r) = dr.asDiagonal() * svd.matrixU().leftCols(b);
  z.bottomRows(c) = dc.asDiagonal() * svd.matrixV().leftCols(b);
  Rng rng = make_rng(seed, {hash_tag("coclustering")});
  const KMeansResult km = kmeans(z, b, rng, 10);
  out.row_labels.assign(km.labels.begin(), km.labels.begin() + r);
  out.col_labels.assign(km.labels.begin() + r, km.labels.end());
  return out;
}

/// Summary of one fitted candidate.
struct CandidateFit {
  double log_lik = 0.0;
  Index dof = 0;
  Index support = 0;
  Index num_blocks = 0;
  Index n = 0;
};

struct CandidateRow {
  double hyperparam = 0.0;
  bool ok = false;
  std::string error;
  CandidateFit fit;
  double bic = -std::numeric_limits<double>::infinity();
};

struct SelectionReport {
  std::vector<CandidateRow> rows;
  Index chosen = -1;  // argmax of BIC among successful fits
};

/// Fits every candidate (up to `jobs` at a time) and picks the BIC maximizer;
/// the lowest index wins ties. Failed fits are kept with ok = false.
inline SelectionReport sweep_and_select(const std::function<CandidateFit(double)>& fitter,
                                        const std::vector<double>& candidates, int jobs = 1) {
  if (candidates.empty()) throw ContractError("sweep_and_select: no candidates");
  SelectionReport rep;
  rep.rows.resize(candidates.size());
  parallel_for(candidates.size(), jobs, [&](std::size_t i) {
    CandidateRow& row = rep.rows[i];
    row.hyperparam = candidates[i];
    try {
      row.fit = fitter(candidates[i]);
      row.bic = bic(row.fit.log_lik, row.fit.dof, row.fit.support, row.fit.n);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    if (rep.rows[i].ok && (rep.chosen < 0 || rep.rows[i].bic > rep.rows[rep.chosen].bic))
      rep.chosen = static_cast<Index>(i);
  if (rep.chosen < 0) throw NumericError("sweep_and_select: every candidate fit failed");
  return rep;
}

/// Index of the value nearest `target` (lowest index on ties).
inline Index closest_candidate(const std::vector<double>& values, double target) {
  if (values.empty()) throw ContractError("closest_candidate: no values");
  Index best = 0;
  for (Index i = 1; i < static_cast<Index>(values.size()); ++i)
    if (std::abs(values[i] - target) < std::abs(values[best] - target)) best = i;
  return best;
}

}  // namespace mvmm
