#include <iostream>

#include <CLI11.hpp>

#include "switchguard/commands.hpp"

using namespace switchguard::cli;

int main(int argc, char** argv) {
  CLI::App app{"DoS-resilient FIR state estimator synthesis for switched-output plants"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SWITCHGUARD_VERSION);

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "schema and dimension checks for a problem config");
  validate->add_option("config", validate_config, "problem config (JSON)")->required();

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "solve the synthesis LP and write a result bundle");
  synth->add_option("config", synth_opts.config, "problem config (JSON)")->required();
  synth->add_option("--out", synth_opts.out, "result bundle path");
  synth->add_option("--mode", synth_opts.mode, "exact or relaxed")->check(CLI::IsMember({"exact", "relaxed"}));
  synth->add_option("--eps", synth_opts.eps, "residual budget eps_bar for relaxed mode");
  synth->add_option("--fir", synth_opts.fir, "FIR length N");
  synth->add_option("--memory", synth_opts.memory, "mode memory M");
  synth->add_option("--dump-lp", synth_opts.dump_lp, "write the LP in CPLEX LP format");

  NormOptions norm_opts;
  auto* norm = app.add_subcommand("norm", "residual and performance norms along switching sequences");
  norm->add_option("bundle", norm_opts.bundle, "result bundle")->required();
  auto* sigma_opt = norm->add_option("--sigma", norm_opts.sigma, "comma separated mode ids, e.g. 0,1,1,0");
  norm->add_option("--samples", norm_opts.samples, "number of sampled sequences")->excludes(sigma_opt);
  norm->add_option("--horizon", norm_opts.horizon, "length of sampled sequences");
  norm->add_option("--csv", norm_opts.csv, "write the CSV rows to this file");

  SimulateOptions sim_opts;
  auto* sim = app.add_subcommand("simulate", "run the estimator on a scenario and write a trace");
  sim->add_option("bundle", sim_opts.bundle, "result bundle")->required();
  auto* scen = sim->add_option("--scenario", sim_opts.scenario, "scenario file (JSON)");
  sim->add_flag("--worst", sim_opts.worst, "use the worst-case disturbance along sigma")->excludes(scen);
  sim->add_option("--sigma", sim_opts.sigma, "sigma for --worst (default: nominal)");
  sim->add_option("--horizon", sim_opts.horizon, "horizon for --worst without --sigma");
  sim->add_option("--initial", sim_opts.initial, "x0bar class: sequence or impulse");
  sim->add_option("--trace", sim_opts.trace, "trace CSV path");
  sim->add_option("--config", sim_opts.config, "replace the attack model with this config's");

  AttackOptions atk_opts;
  auto* atk = app.add_subcommand("attack", "search for the worst switching sequence");
  atk->add_option("bundle", atk_opts.bundle, "result bundle")->required();
  atk->add_option("--horizon", atk_opts.horizon, "sequence length");
  atk->add_option("--strategy", atk_opts.strategy, "exhaustive or greedy");
  atk->add_option("--initial", atk_opts.initial, "x0bar class: sequence or impulse");
  atk->add_option("--config", atk_opts.config, "replace the attack model with this config's");

  ExampleOptions ex_opts;
  auto* ex = app.add_subcommand("example", "reproduce the built-in three-state example");
  ex->add_flag("--json", ex_opts.json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_input;
  }

  if (*validate) return cmd_validate(validate_config, std::cout, std::cerr);
  if (*synth) return cmd_synth(synth_opts, std::cout, std::cerr);
  if (*norm) return cmd_norm(norm_opts, std::cout, std::cerr);
  if (*sim) return cmd_simulate(sim_opts, std::cout, std::cerr);
  if (*atk) return cmd_attack(atk_opts, std::cout, std::cerr);
  return cmd_example(ex_opts, std::cout, std::cerr);
}
