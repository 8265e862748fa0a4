#pragma once

// Implementations behind the mvmm command-line tool. Each command reads its
// inputs from disk, writes its outputs and throws the library errors; the
// exit code mapping lives in run_command.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mvmm/io.hpp"
#include "mvmm/log_pen.hpp"
#include "mvmm/mvmm_bd.hpp"
#include "mvmm/selection.hpp"
#include "mvmm/sim.hpp"

namespace mvmm::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, input_error = 2, numeric_error = 3 };

/// MVMM_SEED, when set, overrides the seed given on the command line.
inline std::uint64_t effective_seed(std::uint64_t flag) {
  const char* env = std::getenv("MVMM_SEED");
  if (!env || !*env) return flag;
  std::uint64_t v = 0;
  const std::string s(env);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("MVMM_SEED must be a non-negative integer, got '" + s + "'");
  return v;
}

/// Runs `body` and maps library errors onto exit codes.
inline int run_command(const std::function<void()>& body, std::ostream& err = std::cerr) {
  try {
    body();
    return ok;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return numeric_error;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return input_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return numeric_error;
  }
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << text;
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// ---- simulate ------------------------------------------------------------

struct SimulateOptions {
  std::string config;
  std::string out_dir;
  int rep = 0;
  std::optional<Index> n;  // default: first entry of n_train
  std::optional<std::uint64_t> seed;
};

inline void cmd_simulate(const SimulateOptions& o) {
  SimConfig c = sim_config_from_json(read_json_file(o.config));
  if (o.seed) c.seed = *o.seed;
  c.seed = effective_seed(c.seed);
  if (o.rep < 0 || o.rep >= c.reps) throw InputError("rep must lie in [0, " + std::to_string(c.reps) + ")");
  const Index n = o.n.value_or(c.n_train.front());
  if (n < 1) throw InputError("n must be >= 1");
  const MvmmModel truth = sim_truth(c, o.rep);
  const SimData s = sim_train(c, truth, o.rep, n);
  const fs::path dir(o.out_dir);
  for (std::size_t v = 0; v < s.x.size(); ++v) {
    std::ostringstream os;
    write_matrix_csv(os, s.x[v], feature_header(s.x[v].cols()));
    write_text(dir / ("view" + std::to_string(v + 1) + ".csv"), os.str());
  }
  std::ostringstream lab;
  lab << "tuple,block";
  for (std::size_t v = 0; v < truth.views.size(); ++v) lab << ",view" << v + 1;
  lab << '\n';
  for (Index i = 0; i < n; ++i) {
    lab << s.tuple_labels[i] << ',' << s.block_labels[i];
    for (std::size_t v = 0; v < truth.views.size(); ++v) lab << ',' << truth.pi.axis_index(s.tuple_labels[i], v);
    lab << '\n';
  }
  write_text(dir / "labels.csv", lab.str());
  json pi = table_json(truth.pi);
  pi["blocks"] = block_structure_json(count_blocks(truth.pi.table(), 0.0));
  write_json(dir / "pi.json", pi);
  json model = model_json(truth);
  model["metadata"] = {{"source", "simulate"}, {"config", to_json(c)}, {"rep", o.rep}, {"n", n}};
  write_json(dir / "truth.json", model);
}

// ---- fit -----------------------------------------------------------------

struct FitOptions {
  std::vector<std::string> views;
  std::vector<Index> k;
  std::string method = "mvmm";
  std::string out;
  std::uint64_t seed = 0;
  EmConfig em;
  LogPenConfig log;
  BdConfig bd;
};

struct FitOutcome {
  MvmmModel model;
  json doc;
  CandidateFit summary;
};

inline EmConfig resolved_em(const FitOptions& o) {
  EmConfig em = o.em;
  em.seed = effective_seed(o.seed);
  return em;
}

/// Fits one model; `doc` is the model document written by `fit`.
inline FitOutcome fit_model(const MultiViewData& data, const FitOptions& o) {
  const EmConfig em = resolved_em(o);
  const Index n = check_data(data);
  FitOutcome out;
  json meta{{"method", o.method}, {"seed", em.seed}, {"n", n}, {"n_init", em.n_init}, {"max_iter", em.max_iter}};
  json extra;
  if (o.method == "mvmm") {
    const MvmmFit f = fit_em(data, o.k, em);
    out.model = f.model;
    meta["iterations"] = f.trace.iterations;
    meta["converged"] = f.trace.converged;
  } else if (o.method == "log") {
    LogPenConfig lc = o.log;
    lc.em = em;
    const MvmmFit f = fit_log_pen(data, o.k, lc);
    out.model = f.model;
    meta["lambda"] = lc.lambda;
    meta["delta"] = lc.delta;
    meta["iterations"] = f.trace.iterations;
    meta["converged"] = f.trace.converged;
    meta["penalized_objective"] = f.trace.objective.back();
  } else if (o.method == "bd") {
    BdConfig bc = o.bd;
    bc.em = em;
    const BdFit f = fit_bd(data, o.k, bc);
    out.model = f.model;
    meta["b"] = bc.b;
    meta["success"] = f.success;
    std::vector<double> alphas;
    for (const auto& r : f.rounds) alphas.push_back(r.alpha);
    extra = {{"epsilon", f.epsilon}, {"d", matrix_json(f.d)}, {"alpha_history", alphas},
             {"blocks", block_structure_json(f.blocks)}};
  } else if (o.method == "cat") {
    if (o.k.size() != 1) throw InputError("cat needs a single component count (--k K)");
    GmmConfig g;
    g.n_init = em.n_init;
    g.max_iter = em.max_iter;
    g.rel_tol = em.rel_tol;
    g.reg_rel = em.reg_rel;
    g.seed = em.seed;
    const GmmFit f = fit_gmm(detail::concat_views(data), o.k.front(), g);
    out.model.views = {f.model};
    out.model.pi = ProbTable::normalized({o.k.front()}, f.weights);
    meta["iterations"] = f.iterations;
    meta["converged"] = f.converged;
  } else {
    throw InputError("unknown method '" + o.method + "' (expected mvmm, log, bd or cat)");
  }
  const MultiViewData cat_data = o.method == "cat" ? MultiViewData{detail::concat_views(data)} : MultiViewData{};
  const MultiViewData& eval = o.method == "cat" ? cat_data : data;
  out.summary = {log_likelihood(out.model, eval), dof_diag_gaussian(out.model), out.model.pi.support_size(),
                 out.model.pi.num_views() >= 2 ? count_blocks(out.model.pi.table(), 0.0).num_blocks : 1, n};
  if (!extra.is_null()) {
    const MatrixXd d = json_matrix(extra.at("d"));
    out.summary.support = static_cast<Index>((d.array() > 0.0).count());
    out.summary.num_blocks = extra.at("blocks").at("num_blocks").get<Index>();
  }
  meta["log_lik"] = out.summary.log_lik;
  meta["dof"] = out.summary.dof;
  meta["support"] = out.summary.support;
  meta["bic"] = bic(out.summary.log_lik, out.summary.dof, out.summary.support, n);
  out.doc = model_json(out.model);
  out.doc["metadata"] = meta;
  if (!extra.is_null()) out.doc["bd"] = extra;
  return out;
}

inline void cmd_fit(const FitOptions& o) {
  const MultiViewData data = read_views(o.views);
  if (o.method != "cat" && o.k.size() != data.size())
    throw InputError("got " + std::to_string(o.k.size()) + " component counts for " + std::to_string(data.size()) +
                     " views");
  write_json(o.out, fit_model(data, o).doc);
}

// ---- select --------------------------------------------------------------

struct SelectOptions {
  FitOptions fit;
  std::vector<double> grid;  // empty: default lambda grid or B = 1..min(K)
  int jobs = 1;
  std::string out;
  std::string json_out;
  std::string models_dir;
};

inline SelectionReport cmd_select(const SelectOptions& o) {
  const MultiViewData data = read_views(o.fit.views);
  if (o.fit.k.size() != data.size()) throw InputError("need one component count per view");
  std::vector<double> grid = o.grid;
  if (o.fit.method == "log") {
    if (grid.empty()) grid = lambda_grid(o.fit.k);
  } else if (o.fit.method == "bd") {
    if (grid.empty())
      for (Index b = 1; b <= std::min(o.fit.k.at(0), o.fit.k.at(1)); ++b) grid.push_back(static_cast<double>(b));
    for (double b : grid)
      if (b != std::floor(b) || b < 1) throw InputError("bd grid values must be positive integers");
  } else {
    throw InputError("select supports --method log or bd");
  }
  std::vector<json> docs(grid.size());
  const SelectionReport rep = sweep_and_select(
      [&](double h) {
        FitOptions f = o.fit;
        if (f.method == "log") f.log.lambda = h;
        else f.bd.b = static_cast<Index>(h);
        FitOutcome r = fit_model(data, f);
        docs[std::find(grid.begin(), grid.end(), h) - grid.begin()] = std::move(r.doc);
        return r.summary;
      },
      grid, o.jobs);
  std::ostringstream os;
  write_report_csv(os, rep);
  write_text(o.out, os.str());
  if (!o.json_out.empty()) write_json(o.json_out, report_json(rep));
  if (!o.models_dir.empty())
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (rep.rows[i].ok) write_json(fs::path(o.models_dir) / ("model_" + std::to_string(i) + ".json"), docs[i]);
  return rep;
}

// ---- blocks / spectrum ---------------------------------------------------

/// Blocks of pi, or of D for block diagonal fits (pi = eps 11^T + D is dense).
inline json cmd_blocks(const std::string& model_path, std::optional<double> support_tol = {}) {
  const json doc = read_json_file(model_path);
  const MvmmModel m = model_from_json(doc);
  json j;
  if (doc.contains("bd")) {
    const MatrixXd d = json_matrix(doc.at("bd").at("d"));
    const BlockStructure bs = count_blocks(d, support_tol);
    j = block_structure_json(bs);
    j["table"] = "d";
    j["support_size"] = static_cast<Index>((d.array() > bs.support_tol).count());
  } else {
    const BlockStructure bs = count_blocks(m.pi.table(), support_tol);
    j = block_structure_json(bs);
    j["table"] = "pi";
    j["support_size"] = m.pi.support_size(bs.support_tol);
  }
  j["shape"] = m.pi.shape();
  return j;
}

inline json spectrum_json(const MatrixXd& x) {
  require_nonnegative(x, "spectrum");
  const SpectrumReport r = spectrum_report(x);
  return {{"sym", vec_json(r.sym)},
          {"un", vec_json(r.un)},
          {"sym_zero_count", r.sym_zero_count},
          {"un_zero_count", r.un_zero_count},
          {"blocks", block_structure_json(count_blocks(x))}};
}

inline json cmd_spectrum(const std::string& matrix_path) { return spectrum_json(read_csv(matrix_path, {}).values); }

// ---- experiment ----------------------------------------------------------

inline void cmd_experiment(const std::string& config, const std::string& out, int jobs,
                           std::optional<std::uint64_t> seed = {}) {
  SimConfig c = sim_config_from_json(read_json_file(config));
  if (seed) c.seed = *seed;
  c.seed = effective_seed(c.seed);
  std::ostringstream os;
  write_results_csv(os, run_experiment(c, jobs));
  write_text(out, os.str());
}

}  // namespace mvmm::cli
