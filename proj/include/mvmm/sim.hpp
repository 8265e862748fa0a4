#pragma once

// Synthetic two-view designs and the Monte-Carlo experiment runner.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "mvmm/errors.hpp"
#include "mvmm/laplacian.hpp"
#include "mvmm/log_pen.hpp"
#include "mvmm/mixtures.hpp"
#include "mvmm/mvmm_bd.hpp"
#include "mvmm/mvmm_core.hpp"
#include "mvmm/parallel.hpp"
#include "mvmm/prob_table.hpp"
#include "mvmm/rng.hpp"
#include "mvmm/selection.hpp"

namespace mvmm {

enum class PiKind { beads, lollipop, sparse_random, diagonal, rank_one };

struct PiDesign {
  PiKind kind = PiKind::beads;
  Index num_blocks = 5;   // beads
  Index block_size = 2;   // beads
  Index singletons = 5;   // lollipop
  Index big_block = 5;    // lollipop
  Index nnz = 18;         // sparse_random
  Index k = 10;           // diagonal, rank_one, sparse_random (square K x K)
};

inline PiKind parse_pi_kind(const std::string& s) {
  if (s == "beads") return PiKind::beads;
  if (s == "lollipop") return PiKind::lollipop;
  if (s == "sparse_random" || s == "sparse") return PiKind::sparse_random;
  if (s == "diagonal") return PiKind::diagonal;
  if (s == "rank_one") return PiKind::rank_one;
  throw InputError("unknown pi design '" + s + "'");
}

inline std::string to_string(PiKind k) {
  switch (k) {
    case PiKind::beads: return "beads";
    case PiKind::lollipop: return "lollipop";
    case PiKind::sparse_random: return "sparse_random";
    case PiKind::diagonal: return "diagonal";
    case PiKind::rank_one: return "rank_one";
  }
  return "unknown";
}

/// Square K x K table for the design. `rng` is used by sparse_random only.
inline ProbTable make_pi(const PiDesign& d, Rng& rng) {
  MatrixXd p;
  switch (d.kind) {
    case PiKind::beads: {
      if (d.num_blocks < 1 || d.block_size < 1) throw ContractError("beads: need positive block count and size");
      const Index k = d.num_blocks * d.block_size;
      p = MatrixXd::Zero(k, k);
      for (Index b = 0; b < d.num_blocks; ++b) p.block(b * d.block_size, b * d.block_size, d.block_size, d.block_size).setOnes();
      break;
    }
    case PiKind::lollipop: {
      if (d.singletons < 0 || d.big_block < 1) throw ContractError("lollipop: invalid block sizes");
      const Index k = d.singletons + d.big_block;
      const double blocks = static_cast<double>(d.singletons + 1);
      p = MatrixXd::Zero(k, k);
      for (Index i = 0; i < d.singletons; ++i) p(i, i) = 1.0 / blocks;
      p.bottomRightCorner(d.big_block, d.big_block).setConstant(1.0 / (blocks * d.big_block * d.big_block));
      break;
    }
    case PiKind::sparse_random: {
      const Index k = d.k;
      if (d.nnz < k || d.nnz > k * k) throw ContractError("sparse_random: need K <= nnz <= K^2");
      std::vector<Index> cells(k * k);
      for (int attempt = 0;; ++attempt) {
        if (attempt == 10000) throw ContractError("sparse_random: could not draw a support with positive marginals");
        std::iota(cells.begin(), cells.end(), Index{0});
        std::shuffle(cells.begin(), cells.end(), rng);
        p = MatrixXd::Zero(k, k);
        for (Index i = 0; i < d.nnz; ++i) p(cells[i] / k, cells[i] % k) = 1.0;
        if (p.rowwise().sum().minCoeff() > 0.0 && p.colwise().sum().minCoeff() > 0.0) break;
      }
      break;
    }
    case PiKind::diagonal:
      if (d.k < 1) throw ContractError("diagonal: K must be positive");
      p = MatrixXd::Identity(d.k, d.k);
      break;
    case PiKind::rank_one:
      if (d.k < 1) throw ContractError("rank_one: K must be positive");
      p = MatrixXd::Ones(d.k, d.k);
      break;
  }
  p /= p.sum();
  return ProbTable::from_matrix(p);
}

/// Component means ~ N(0, sigma_mean[v]^2 I), unit variances.
inline MvmmModel sample_model(const ProbTable& pi, const std::vector<double>& sigma_mean, const std::vector<Index>& dims,
                              Rng& rng) {
  const Index v_count = pi.num_views();
  if (static_cast<Index>(sigma_mean.size()) != v_count || static_cast<Index>(dims.size()) != v_count)
    throw ShapeError("sample_model: need one sigma and dimension per view");
  std::normal_distribution<double> z(0.0, 1.0);
  MvmmModel m;
  m.pi = pi;
  for (Index v = 0; v < v_count; ++v) {
    ViewModel vm;
    for (Index k = 0; k < pi.shape()[v]; ++k) {
      GaussianDiagComponent c;
      c.mean.resize(dims[v]);
      for (Index j = 0; j < dims[v]; ++j) c.mean(j) = sigma_mean[v] * z(rng);
      c.variance = VectorXd::Ones(dims[v]);
      vm.components.push_back(std::move(c));
    }
    m.views.push_back(std::move(vm));
  }
  return m;
}

struct SimData {
  MultiViewData x;
  std::vector<int> tuple_labels;  // flat cell index of the label tuple
  std::vector<int> block_labels;  // block of the tuple in count_blocks(pi)
};

inline SimData sample_dataset(const MvmmModel& m, Index n, Rng& rng) {
  const ProbTable& pi = m.pi;
  const BlockStructure bs = count_blocks(pi.table(), 0.0);
  std::vector<double> cum(pi.cells());
  std::partial_sum(pi.values().data(), pi.values().data() + pi.cells(), cum.begin());
  std::uniform_real_distribution<double> u(0.0, cum.back());
  std::normal_distribution<double> z(0.0, 1.0);
  SimData s;
  for (const auto& v : m.views) s.x.emplace_back(n, v.dim());
  s.tuple_labels.resize(n);
  s.block_labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double r = u(rng);
    Index t = std::upper_bound(cum.begin(), cum.end(), r) - cum.begin();
    t = std::min(t, pi.cells() - 1);
    s.tuple_labels[i] = static_cast<int>(t);
    s.block_labels[i] = bs.labels[0][pi.axis_index(t, 0)];
    for (std::size_t v = 0; v < m.views.size(); ++v) {
      const auto& c = m.views[v].components[pi.axis_index(t, static_cast<Index>(v))];
      for (Index j = 0; j < c.dim(); ++j) s.x[v](i, j) = c.mean(j) + std::sqrt(c.variance(j)) * z(rng);
    }
  }
  return s;
}

struct SimConfig {
  PiDesign design;
  std::vector<double> sigma_mean{1.0, 0.5};
  std::vector<Index> dims{10, 10};
  std::vector<Index> n_train{200, 500, 1000, 1500, 2000, 2500, 3000, 3500, 4000};
  Index n_test = 2000;
  int reps = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"mvmm", "log", "bd", "cat"};
  std::vector<double> b_grid;  // empty: 1..K
  int lambda_count = 20;
  int n_init = 10;
  int max_iter = 300;
};

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  try {
    if (j.contains("design")) {
      const auto& d = j.at("design");
      c.design.kind = parse_pi_kind(d.at("kind").get<std::string>());
      c.design.num_blocks = d.value("num_blocks", c.design.num_blocks);
      c.design.block_size = d.value("block_size", c.design.block_size);
      c.design.singletons = d.value("singletons", c.design.singletons);
      c.design.big_block = d.value("big_block", c.design.big_block);
      c.design.nnz = d.value("nnz", c.design.nnz);
      c.design.k = d.value("k", c.design.k);
    }
    c.sigma_mean = j.value("sigma_mean", c.sigma_mean);
    c.dims = j.value("d", c.dims);
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    c.reps = j.value("reps", c.reps);
    c.seed = j.value("seed", c.seed);
    c.methods = j.value("methods", c.methods);
    c.b_grid = j.value("b_grid", c.b_grid);
    c.lambda_count = j.value("lambda_count", c.lambda_count);
    c.n_init = j.value("n_init", c.n_init);
    c.max_iter = j.value("max_iter", c.max_iter);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid simulation config: ") + e.what());
  }
  if (c.sigma_mean.size() != 2 || c.dims.size() != 2) throw InputError("simulation config needs two views");
  if (c.reps < 1 || c.n_train.empty()) throw InputError("simulation config needs reps >= 1 and some n_train");
  for (const auto& m : c.methods)
    if (m != "mvmm" && m != "log" && m != "bd" && m != "cat") throw InputError("unknown method '" + m + "'");
  return c;
}

inline nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json d{{"kind", to_string(c.design.kind)}, {"num_blocks", c.design.num_blocks},
                   {"block_size", c.design.block_size}, {"singletons", c.design.singletons},
                   {"big_block", c.design.big_block}, {"nnz", c.design.nnz}, {"k", c.design.k}};
  return {{"design", d},          {"sigma_mean", c.sigma_mean}, {"d", c.dims},           {"n_train", c.n_train},
          {"n_test", c.n_test},   {"reps", c.reps},             {"seed", c.seed},        {"methods", c.methods},
          {"b_grid", c.b_grid},   {"lambda_count", c.lambda_count}, {"n_init", c.n_init}, {"max_iter", c.max_iter}};
}

/// The true pi and cluster parameters of repetition `rep`.
inline MvmmModel sim_truth(const SimConfig& c, int rep) {
  Rng pr = make_rng(c.seed, {hash_tag("pi"), static_cast<std::uint64_t>(rep)});
  const ProbTable pi = make_pi(c.design, pr);
  Rng mr = make_rng(c.seed, {hash_tag("means"), static_cast<std::uint64_t>(rep)});
  return sample_model(pi, c.sigma_mean, c.dims, mr);
}

inline SimData sim_train(const SimConfig& c, const MvmmModel& truth, int rep, Index n) {
  Rng r = make_rng(c.seed, {hash_tag("train"), static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(n)});
  return sample_dataset(truth, n, r);
}

inline SimData sim_test(const SimConfig& c, const MvmmModel& truth, int rep) {
  Rng r = make_rng(c.seed, {hash_tag("test"), static_cast<std::uint64_t>(rep)});
  return sample_dataset(truth, c.n_test, r);
}

struct ResultRow {
  int rep = 0;
  std::string method;
  Index n = 0;
  double hyperparam = std::numeric_limits<double>::quiet_NaN();
  std::string metric;
  double value = 0.0;
};

namespace detail {

inline MatrixXd concat_views(const MultiViewData& x) {
  Index d = 0;
  for (const auto& v : x) d += v.cols();
  MatrixXd out(x.front().rows(), d);
  Index off = 0;
  for (const auto& v : x) {
    out.middleCols(off, v.cols()) = v;
    off += v.cols();
  }
  return out;
}

inline std::vector<int> block_labels_from_structure(const MvmmModel& m, const BlockStructure& bs, const MultiViewData& x) {
  return predict_block_labels(m, bs, x);
}

struct ExperimentCell {
  int rep;
  Index n;
  std::string method;
};

inline void add(std::vector<ResultRow>& rows, const ExperimentCell& c, double h, const std::string& metric, double v) {
  rows.push_back({c.rep, c.method, c.n, h, metric, v});
}

// Fits one (rep, n, method) cell and evaluates it on the held-out test set.
inline std::vector<ResultRow> run_cell(const SimConfig& cfg, const ExperimentCell& cell) {
  std::vector<ResultRow> rows;
  const MvmmModel truth = sim_truth(cfg, cell.rep);
  const SimData train = sim_train(cfg, truth, cell.rep, cell.n);
  const SimData test = sim_test(cfg, truth, cell.rep);
  const std::vector<Index> k = truth.pi.shape();
  const BlockStructure true_bs = count_blocks(truth.pi.table(), 0.0);
  const Index true_support = truth.pi.support_size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EmConfig em;
  em.n_init = cfg.n_init;
  em.max_iter = cfg.max_iter;
  em.seed = derive_seed(cfg.seed, {hash_tag("fit"), static_cast<std::uint64_t>(cell.rep), static_cast<std::uint64_t>(cell.n),
                                   hash_tag(cell.method)});

  if (cell.method == "mvmm") {
    const MvmmFit f = fit_em(train.x, k, em);
    add(rows, cell, nan, "overall_ari", ari(predict(f.model, test.x).overall, test.tuple_labels));
    const CoClustering cc = bipartite_spectral_coclustering(f.model.pi.matrix(), true_bs.num_blocks, em.seed);
    add(rows, cell, nan, "block_ari",
        ari(predict_block_labels(f.model, cc.row_labels, cc.col_labels, true_bs.num_blocks, test.x), test.block_labels));
    add(rows, cell, nan, "log_lik", f.trace.objective.back());
  } else if (cell.method == "cat") {
    GmmConfig g;
    g.n_init = cfg.n_init;
    g.max_iter = cfg.max_iter;
    g.seed = em.seed;
    const GmmFit f = fit_gmm(concat_views(train.x), true_support, g);
    add(rows, cell, nan, "overall_ari", ari(gmm_predict(f.model, f.weights, concat_views(test.x)), test.tuple_labels));
  } else if (cell.method == "log") {
    const std::vector<double> grid = lambda_grid(k, cfg.lambda_count);
    std::vector<MvmmFit> fits(grid.size());
    const SelectionReport rep = sweep_and_select(
        [&](double lambda) {
          LogPenConfig lc;
          lc.lambda = lambda;
          lc.em = em;
          lc.log_violations = false;
          const MvmmFit f = fit_log_pen(train.x, k, lc);
          const std::size_t i = std::find(grid.begin(), grid.end(), lambda) - grid.begin();
          fits[i] = f;
          const Index n = check_data(train.x);
          return CandidateFit{log_likelihood(f.model, train.x), dof_diag_gaussian(f.model), f.model.pi.support_size(),
                              count_blocks(f.model.pi.table(), 0.0).num_blocks, n};
        },
        grid);
    std::vector<double> supports;
    for (const auto& r : rep.rows) supports.push_back(r.ok ? static_cast<double>(r.fit.support) : -1e300);
    const Index at_truth = closest_candidate(supports, static_cast<double>(true_support));
    for (auto [tag, idx] : {std::pair<std::string, Index>{"truth", at_truth}, {"bic", rep.chosen}}) {
      const MvmmFit& f = fits[idx];
      const BlockStructure bs = count_blocks(f.model.pi.table(), 0.0);
      add(rows, cell, grid[idx], "overall_ari_" + tag, ari(predict(f.model, test.x).overall, test.tuple_labels));
      add(rows, cell, grid[idx], "block_ari_" + tag, ari(predict_block_labels(f.model, bs, test.x), test.block_labels));
      add(rows, cell, grid[idx], "n_comp_" + tag, static_cast<double>(f.model.pi.support_size()));
    }
  } else if (cell.method == "bd") {
    std::vector<double> grid = cfg.b_grid;
    if (grid.empty())
      for (Index b = 1; b <= std::min(k[0], k[1]); ++b) grid.push_back(static_cast<double>(b));
    std::vector<BdFit> fits(grid.size());
    const SelectionReport rep = sweep_and_select(
        [&](double b) {
          BdConfig bc;
          bc.b = static_cast<Index>(b);
          bc.em = em;
          const BdFit f = fit_bd(train.x, k, bc);
          fits[std::find(grid.begin(), grid.end(), b) - grid.begin()] = f;
          return CandidateFit{f.log_lik, dof_diag_gaussian(f.model), f.support_size(), f.blocks.num_blocks,
                              check_data(train.x)};
        },
        grid);
    for (const auto& r : rep.rows)
      if (!r.ok) add(rows, cell, r.hyperparam, "fit_failed", 1.0);
    std::vector<double> okb;
    for (const auto& r : rep.rows) okb.push_back(r.ok ? r.hyperparam : -1e300);
    const Index at_truth = closest_candidate(okb, static_cast<double>(true_bs.num_blocks));
    for (auto [tag, idx] : {std::pair<std::string, Index>{"truth", at_truth}, {"bic", rep.chosen}}) {
      const BdFit& f = fits[idx];
      add(rows, cell, grid[idx], "overall_ari_" + tag, ari(predict(f.model, test.x).overall, test.tuple_labels));
      add(rows, cell, grid[idx], "block_ari_" + tag, ari(predict_block_labels(f.model, f.blocks, test.x), test.block_labels));
      add(rows, cell, grid[idx], "n_blocks_" + tag, static_cast<double>(f.blocks.num_blocks));
    }
  }
  return rows;
}

}  // namespace detail

/// Runs every (rep, n, method) cell, up to `jobs` concurrently. Rows come
/// back ordered by rep, then n, then the configured method order, so the
/// output does not depend on `jobs`. A failing cell yields an "error" row.
inline std::vector<ResultRow> run_experiment(const SimConfig& cfg, int jobs = 1) {
  std::vector<detail::ExperimentCell> cells;
  for (int r = 0; r < cfg.reps; ++r)
    for (Index n : cfg.n_train)
      for (const auto& m : cfg.methods) cells.push_back({r, n, m});
  std::vector<std::vector<ResultRow>> out(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = detail::run_cell(cfg, cells[i]);
    } catch (const std::exception& e) {
      out[i] = {{cells[i].rep, cells[i].method, cells[i].n, std::numeric_limits<double>::quiet_NaN(), "error", 1.0}};
    }
  });
  std::vector<ResultRow> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

}  // namespace mvmm
