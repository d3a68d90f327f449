#pragma once

// Time-domain harness: plant under attack, FIR estimator, observer
// recursion, worst-case disturbances and worst-case attack sequences.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>

#include "switchguard/switched_model.hpp"

namespace switchguard {

/// State injection x0bar enters as x(t) = A x(t-1) + B w(t-1) + x0bar(t).
/// An initial condition is the special case x0bar = (x0, 0, 0, ...).
struct Scenario {
  ModeSequence sigma;
  SignalD w;
  SignalD x0bar;

  static Scenario with_initial_state(ModeSequence sigma, SignalD w, const Vector& x0);
  static Scenario zero(ModeSequence sigma, Index disturbance_dim, Index state_dim);

  Index horizon() const { return static_cast<Index>(sigma.size()); }
  /// Throws std::invalid_argument on inconsistent lengths, dimensions, bad
  /// mode ids, or a sigma the automaton rejects.
  void validate(const ChannelPlant& plant, const SwitchedOutputModel& model,
                const SwitchingAutomaton* automaton = nullptr) const;
};

struct PlantResponse {
  SignalD x;
  SignalD y_a;
};

PlantResponse simulate_plant(const ChannelPlant& plant, const SwitchedOutputModel& model, const Scenario& scenario);

/// xhat(t) = sum_k T(window(sigma, t, M), k) y_a(t - k).
SignalD run_fir_estimator(const SwitchingFIR& t, const SignalD& y_a, std::span<const Mode> sigma,
                          Mode padding_mode = 0);

/// Observer (I + Q)(I - Lambda Abar) xhat = Z (Cbar xhat - y_a), stepped in
/// time with a linear solve for the lag-0 loop.
SignalD run_glo(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                const SwitchedOutputModel& model, const SignalD& y_a, std::span<const Mode> sigma,
                Mode padding_mode = 0);

struct FirEstimator {
  SwitchingFIR T;
};

struct ObserverEstimator {
  SwitchingFIR Q;
  SwitchingFIR Z;
};

using Estimator = std::variant<FirEstimator, ObserverEstimator>;

SignalD run_estimator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                      const SignalD& y_a, std::span<const Mode> sigma, Mode padding_mode = 0);

/// Causal map y_a -> xhat along sigma.
Operator estimator_operator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                            std::span<const Mode> sigma, Mode padding_mode = 0);

/// Causal map [w; x0bar] -> e = xhat - x along sigma.
Operator error_operator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                        std::span<const Mode> sigma, Mode padding_mode = 0);

struct Trace {
  SignalD x;
  SignalD y_a;
  SignalD x_hat;
  SignalD e;
  double sup_error = 0.0;
};

Trace simulate(const ChannelPlant& plant, const SwitchedOutputModel& model, const Estimator& est,
               const Scenario& scenario, Mode padding_mode = 0);

enum class InitialCondition {
  /// x0bar ranges over sequences with sup norm <= x0_bound.
  sequence,
  /// x0bar is (x0, 0, ...) with ||x0|| <= x0_bound.
  impulse,
};

struct WorstCaseOptions {
  InitialCondition initial = InitialCondition::sequence;
  Mode padding_mode = 0;
};

struct WorstCase {
  Scenario scenario;
  /// Largest |e_i(t)| over unit w and x0bar within x0_bound.
  double value = 0.0;
  Index time = 0;
  Index row = 0;
};

/// Error operator with the x0bar columns scaled by x0_bound, and restricted to
/// input time 0 in impulse mode.
Operator scaled_error_operator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                               std::span<const Mode> sigma, const WorstCaseOptions& options = {});

/// Sign-pattern input that attains the peak error along sigma.
WorstCase worst_case_inputs(const ChannelPlant& plant, const SwitchedOutputModel& model, const Estimator& est,
                            std::span<const Mode> sigma, const WorstCaseOptions& options = {});

enum class AttackStrategy { exhaustive, greedy };

const char* to_string(AttackStrategy s);

inline constexpr std::uint64_t max_exhaustive_sequences = std::uint64_t{1} << 20;

struct AttackResult {
  ModeSequence sigma;
  double value = 0.0;
  std::uint64_t evaluated = 0;
};

/// exhaustive: max over every admissible sigma of the horizon. greedy:
/// extends sigma one step at a time with the mode that maximizes the error
/// norm over the prefix. Ties go to the smaller mode id (lexicographic order).
AttackResult attack_search(const ChannelPlant& plant, const SwitchedOutputModel& model,
                           const SwitchingAutomaton& automaton, const Estimator& est, Index horizon,
                           AttackStrategy strategy, const WorstCaseOptions& options = {});

}  // namespace switchguard
