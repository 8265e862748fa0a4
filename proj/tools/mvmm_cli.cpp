#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mvmm/commands.hpp"

using namespace mvmm;
using namespace mvmm::cli;

namespace {

void add_fit_flags(CLI::App* sc, FitOptions& o) {
  sc->add_option("--views", o.views, "one CSV per view (header row, rows aligned)")->required()->check(CLI::ExistingFile);
  sc->add_option("--k", o.k, "components per view (cat: total components)")->required();
  sc->add_option("--seed", o.seed, "random seed (MVMM_SEED overrides)");
  sc->add_option("--n-init", o.em.n_init, "random starts")->check(CLI::PositiveNumber);
  sc->add_option("--max-iter", o.em.max_iter, "EM iteration cap")->check(CLI::NonNegativeNumber);
  sc->add_option("--rel-tol", o.em.rel_tol, "relative objective change that stops EM");
  sc->add_option("--reg-rel", o.em.reg_rel, "variance floor relative to feature variance");
  sc->add_option("--lambda", o.log.lambda, "log penalty weight (log)");
  sc->add_option("--delta", o.log.delta, "log penalty offset (log)");
  sc->add_option("--init-iter", o.log.init_iter, "plain EM steps before the structured fit");
  sc->add_option("--b", o.bd.b, "number of blocks (bd)");
  sc->add_option("--epsilon", o.bd.epsilon, "dense floor of pi, 0 for 0.01/(K1 K2) (bd)");
  sc->add_option("--alpha0", o.bd.alpha0, "initial eigenvalue penalty (bd); default from the median heuristic");
  sc->add_option("--alpha-factor", o.bd.alpha_factor, "alpha growth per round (bd)");
  sc->add_option("--c-heuristic", o.bd.c_heuristic, "constant of the alpha heuristic (bd)");
  sc->add_option("--alpha-max", o.bd.alpha_max, "give up once alpha exceeds this (bd)");
  sc->add_option("--eigsum-tol", o.bd.eigsum_tol, "eigenvalue sum counted as zero (bd)");
  sc->add_option("--support-rel", o.bd.support_rel, "support threshold relative to max D (bd)");
}

void sync_init_iter(FitOptions& o) { o.bd.init_iter = o.log.init_iter; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvmm: multi-view mixture models with structured cluster membership tables"};
  app.require_subcommand(1);

  SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  Index sim_n = 0;
  auto* sc_sim = app.add_subcommand("simulate", "write a synthetic dataset from a JSON simulation config");
  sc_sim->add_option("--config", sim.config, "simulation config (JSON)")->required()->check(CLI::ExistingFile);
  sc_sim->add_option("--out", sim.out_dir, "output directory")->required();
  sc_sim->add_option("--rep", sim.rep, "Monte-Carlo repetition");
  auto* sim_n_opt = sc_sim->add_option("--n", sim_n, "training rows (default: first n_train)");
  auto* sim_seed_opt = sc_sim->add_option("--seed", sim_seed, "overrides the config seed");

  FitOptions fit;
  auto* sc_fit = app.add_subcommand("fit", "fit one model and write model JSON");
  add_fit_flags(sc_fit, fit);
  sc_fit->add_option("--method", fit.method, "mvmm, log, bd or cat")->check(CLI::IsMember({"mvmm", "log", "bd", "cat"}));
  sc_fit->add_option("--out", fit.out, "model JSON path")->required();

  SelectOptions sel;
  auto* sc_sel = app.add_subcommand("select", "fit a hyperparameter grid and select by BIC");
  add_fit_flags(sc_sel, sel.fit);
  sc_sel->add_option("--method", sel.fit.method, "log or bd")->required()->check(CLI::IsMember({"log", "bd"}));
  sc_sel->add_option("--grid", sel.grid, "lambda values (log) or block counts (bd)");
  sc_sel->add_option("--jobs", sel.jobs, "grid points fitted concurrently")->check(CLI::PositiveNumber);
  sc_sel->add_option("--out", sel.out, "report CSV path")->required();
  sc_sel->add_option("--json", sel.json_out, "also write the report as JSON");
  sc_sel->add_option("--models-dir", sel.models_dir, "write every fitted model here");

  std::string model_path, blocks_out;
  double support_tol = 0.0;
  auto* sc_blocks = app.add_subcommand("blocks", "report the block structure of a model's pi");
  sc_blocks->add_option("--model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  auto* tol_opt = sc_blocks->add_option("--support-tol", support_tol, "absolute support threshold (default 1e-8 max)");
  sc_blocks->add_option("--out", blocks_out, "write JSON here instead of stdout");

  std::string matrix_path, spectrum_out;
  auto* sc_spec = app.add_subcommand("spectrum", "Laplacian spectra of a nonnegative matrix");
  sc_spec->add_option("--matrix", matrix_path, "matrix CSV (optional header)")->required()->check(CLI::ExistingFile);
  sc_spec->add_option("--out", spectrum_out, "write JSON here instead of stdout");

  std::string exp_config, exp_out;
  int exp_jobs = 1;
  std::uint64_t exp_seed = 0;
  auto* sc_exp = app.add_subcommand("experiment", "run the Monte-Carlo comparison and write results CSV");
  sc_exp->add_option("--config", exp_config, "simulation config (JSON)")->required()->check(CLI::ExistingFile);
  sc_exp->add_option("--out", exp_out, "results CSV path")->required();
  sc_exp->add_option("--jobs", exp_jobs, "cells fitted concurrently")->check(CLI::PositiveNumber);
  auto* exp_seed_opt = sc_exp->add_option("--seed", exp_seed, "overrides the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : input_error;
  }

  auto emit = [](const json& j, const std::string& out) {
    if (out.empty())
      std::cout << j.dump(2) << '\n';
    else
      write_json(out, j);
  };

  if (*sc_sim)
    return run_command([&] {
      if (*sim_seed_opt) sim.seed = sim_seed;
      if (*sim_n_opt) sim.n = sim_n;
      cmd_simulate(sim);
    });
  if (*sc_fit)
    return run_command([&] {
      sync_init_iter(fit);
      cmd_fit(fit);
    });
  if (*sc_sel)
    return run_command([&] {
      sync_init_iter(sel.fit);
      const SelectionReport rep = cmd_select(sel);
      std::cout << "selected " << format_double(rep.rows[rep.chosen].hyperparam) << '\n';
    });
  if (*sc_blocks)
    return run_command([&] {
      emit(cmd_blocks(model_path, *tol_opt ? std::optional<double>(support_tol) : std::nullopt), blocks_out);
    });
  if (*sc_spec) return run_command([&] { emit(cmd_spectrum(matrix_path), spectrum_out); });
  if (*sc_exp)
    return run_command([&] {
      cmd_experiment(exp_config, exp_out, exp_jobs, *exp_seed_opt ? std::optional<std::uint64_t>(exp_seed) : std::nullopt);
    });
  return input_error;
}
