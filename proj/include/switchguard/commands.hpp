#pragma once

// Command implementations behind the switchguard executable. Each returns
// the process exit code and writes only to the given streams.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

#include "switchguard/config.hpp"
#include "switchguard/simulate.hpp"

namespace switchguard::cli {

enum ExitCode : int { exit_ok = 0, exit_input = 2, exit_infeasible = 3, exit_numerical = 4 };

std::string format_number(double v);
ModeSequence parse_sigma(const std::string& spec, std::size_t mode_count);

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err);

struct SynthOptions {
  std::string config;
  std::string out;
  std::optional<std::string> mode;
  std::optional<double> eps;
  std::optional<std::size_t> fir;
  std::optional<std::size_t> memory;
  std::string dump_lp;
};

int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& err);

struct NormOptions {
  std::string bundle;
  std::optional<std::string> sigma;
  std::optional<std::size_t> samples;
  std::optional<Index> horizon;
  std::string csv;
};

int cmd_norm(const NormOptions& o, std::ostream& out, std::ostream& err);

struct SimulateOptions {
  std::string bundle;
  std::string scenario;
  bool worst = false;
  std::optional<std::string> sigma;
  Index horizon = 20;
  std::string initial = "sequence";
  std::string trace;
  std::string config;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err);

struct AttackOptions {
  std::string bundle;
  Index horizon = 12;
  std::string strategy = "exhaustive";
  std::string initial = "sequence";
  std::string config;
};

int cmd_attack(const AttackOptions& o, std::ostream& out, std::ostream& err);

struct ExampleOptions {
  bool json = false;
};

int cmd_example(const ExampleOptions& o, std::ostream& out, std::ostream& err);

/// Problem and estimator recovered from a bundle, optionally with the attack
/// model replaced by another config over the same plant.
struct LoadedBundle {
  ResultBundle bundle;
  ProblemConfig problem;
  SwitchedOutputModel model;
  Estimator estimator;
};

LoadedBundle load_for_evaluation(const std::string& bundle_path, const std::string& override_config = {});

Scenario parse_scenario(const Json& j, const ProblemConfig& problem);

}  // namespace switchguard::cli
