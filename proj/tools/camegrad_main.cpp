// camegrad: experiment runner for the multi-task gradient-surgery library.

#include <iostream>

#include <CLI11.hpp>

#include "camegrad/cli/commands.hpp"

namespace cli = camegrad::cli;

int main(int argc, char** argv) {
  CLI::App app{"Conflict-averse, magnitude-enhanced multi-task gradient steps"};
  app.require_subcommand(1);

  cli::RectifyArgs rectify;
  auto* rectify_cmd = app.add_subcommand("rectify", "Solve the dual and print the rectified direction");
  rectify_cmd->add_option("input", rectify.input, "GradientSet text file")->required();
  rectify_cmd->add_option("--rho", rectify.rho, "Trust-region radius factor in [0, 1)");

  cli::StepArgs step;
  std::string step_strategy;
  double rho = 0, kappa = 0, nu = 0, epsilon = 0, sigma = 0;
  auto* step_cmd = app.add_subcommand("step", "Run one full optimizer step on a GradientSet file");
  step_cmd->add_option("input", step.input, "GradientSet text file")->required();
  auto* step_config = step_cmd->add_option("--config", "Experiment config supplying [came] values");
  auto* step_strat = step_cmd->add_option("--strategy", step_strategy, "Strategy name");
  auto* o_rho = step_cmd->add_option("--rho", rho);
  auto* o_kappa = step_cmd->add_option("--kappa", kappa);
  auto* o_nu = step_cmd->add_option("--nu", nu);
  auto* o_eps = step_cmd->add_option("--epsilon", epsilon);
  auto* o_sigma = step_cmd->add_option("--sgld-sigma", sigma);
  step_cmd->add_option("--seed", step.seed, "Seed for the SGLD noise stream");

  cli::TrainArgs train;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train toy problems, one CSV per strategy and seed");
  train_cmd->add_option("config", train.config, "Experiment config file")->required();
  auto* train_out_opt = train_cmd->add_option("--output-dir", train_out);
  train_cmd->add_flag("--quiet", train.quiet, "Suppress progress lines");
  train_cmd->add_flag("--dump-gradients", train.dump_gradients,
                      "Also write every g_final as <run>_gfinal.csv");

  cli::SweepArgs sweep;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Cartesian hyperparameter sweep");
  sweep_cmd->add_option("config", sweep.config, "Experiment config with a [sweep] section")->required();
  auto* sweep_out_opt = sweep_cmd->add_option("--output-dir", sweep_out);
  sweep_cmd->add_flag("--quiet", sweep.quiet);
  sweep_cmd->add_option("--max-runs", sweep.max_runs, "Refuse sweeps larger than this");
  sweep_cmd->add_option("--jobs", sweep.jobs, "Concurrent runs");

  cli::OracleCheckArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Compare the dual solver with the brute-force oracle");
  oracle_cmd->add_option("--count", oracle.count);
  oracle_cmd->add_option("--dims", oracle.dims);
  oracle_cmd->add_option("--tasks", oracle.tasks, "K+1");
  oracle_cmd->add_option("--rho", oracle.rho);
  oracle_cmd->add_option("--seed", oracle.seed);
  oracle_cmd->add_option("--resolution", oracle.resolution);
  oracle_cmd->add_option("--tolerance", oracle.tolerance, "Largest accepted gap");

  cli::DiagnoseArgs diagnose;
  std::string diagnose_out;
  double diag_kappa = 1.0;
  auto* diagnose_cmd = app.add_subcommand("diagnose", "Conflict histogram and covariance traces");
  diagnose_cmd->add_option("logs", diagnose.logs, "Training log CSVs");
  diagnose_cmd->add_option("--grad-stream", diagnose.gradient_streams, "step,g_0,... CSVs");
  auto* diag_out_opt = diagnose_cmd->add_option("--output-dir", diagnose_out);
  diagnose_cmd->add_option("--bins", diagnose.bins);
  diagnose_cmd->add_option("--window", diagnose.window);
  auto* diag_kappa_opt = diagnose_cmd->add_option("--kappa", diag_kappa);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitParse;
  }

  const cli::Streams io{std::cout, std::cerr};
  if (*rectify_cmd) return cli::cmd_rectify(rectify, io);
  if (*step_cmd) {
    if (*step_config) step.config = step_config->as<std::string>();
    if (*step_strat) step.strategy = step_strategy;
    if (*o_rho) step.rho = rho;
    if (*o_kappa) step.kappa = kappa;
    if (*o_nu) step.nu = nu;
    if (*o_eps) step.epsilon = epsilon;
    if (*o_sigma) step.sgld_sigma = sigma;
    return cli::cmd_step(step, io);
  }
  if (*train_cmd) {
    if (*train_out_opt) train.output_dir = train_out;
    return cli::cmd_train(train, io);
  }
  if (*sweep_cmd) {
    if (*sweep_out_opt) sweep.output_dir = sweep_out;
    return cli::cmd_sweep(sweep, io);
  }
  if (*oracle_cmd) return cli::cmd_oracle_check(oracle, io);
  if (*diagnose_cmd) {
    if (*diag_out_opt) diagnose.output_dir = diagnose_out;
    if (*diag_kappa_opt) diagnose.kappa = diag_kappa;
    return cli::cmd_diagnose(diagnose, io);
  }
  return cli::kExitParse;
}
