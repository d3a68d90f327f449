#pragma once

// Optimal DoS-resilient estimator synthesis as a linear program over the FIR
// switching factors (Q, Z) of a generalized Luenberger observer
//
//   xhat = Lambda Abar xhat + (I + Q)^{-1} Z (Cbar xhat - y_a).
//
// Residual operator:    E   = Lambda Abar + Z Cbar + Q (Lambda Abar - I)
// Performance operator: Phi = [Lambda Bbar + Z Dbar + Q Lambda Bbar,  I + Q]
//
// Both are FIR in the lag, and their lag-k entries at time t only depend on
// the last max(M, N) modes, so one constraint row per admissible window of
// that length covers every sigma and every time step.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "switchguard/lp.hpp"
#include "switchguard/switched_model.hpp"

namespace switchguard {

enum class ResidualMode { exact, relaxed };

const char* to_string(ResidualMode m);

struct SynthesisConfig {
  std::size_t memory = 1;
  std::size_t fir_length = 5;
  ResidualMode mode = ResidualMode::exact;
  /// Residual norm budget in relaxed mode, 0 <= eps_bar < 1.
  double eps_bar = 0.0;
  Index verify_horizon = 30;
  std::size_t verify_samples = 20;
  std::uint64_t seed = 1;
  SimplexOptions lp;

  std::size_t extended_length() const { return std::max(memory, fir_length); }
  void validate() const;
};

enum class Factor { Q, Z };

/// Maps every scalar entry of the Q and Z taps to an LP variable id.
class DecisionLayout {
 public:
  DecisionLayout(std::vector<ModeHistory> histories, std::size_t fir_length, Index state_dim,
                 Index output_dim);

  Index size() const { return size_; }
  const std::vector<ModeHistory>& histories() const { return histories_; }
  std::size_t fir_length() const { return fir_length_; }
  Index state_dim() const { return n_; }
  Index output_dim() const { return p_; }

  Index id(Factor f, const ModeHistory& h, std::size_t lag, Index row, Index col) const;
  std::string name(Index id) const;

  SwitchingFIR unpack(Factor f, const Vector& values) const;
  Vector pack(const SwitchingFIR& q, const SwitchingFIR& z) const;

 private:
  std::size_t history_index(const ModeHistory& h) const;

  std::vector<ModeHistory> histories_;
  std::size_t fir_length_;
  Index n_, p_;
  Index per_history_;
  Index size_;
};

/// constant + sum coeff * v[id]; terms sorted by id, no zero coefficients.
struct AffineForm {
  std::vector<std::pair<Index, double>> terms;
  double constant = 0.0;

  double evaluate(const Vector& values) const;
  bool is_constant() const { return terms.empty(); }
  auto operator<=>(const AffineForm&) const = default;
};

enum class RowKind { residual, performance };

struct FormEntry {
  Index lag;
  /// Input column of the operator (performance rows: w columns, then x0 columns).
  Index column;
  AffineForm form;
};

/// One output row of E or Phi for one extended history window; its l1 norm
/// is the induced-norm row sum at any time presenting that window.
struct ConstraintRow {
  ModeHistory history;
  Index output_row = 0;
  RowKind kind = RowKind::residual;
  std::vector<FormEntry> entries;

  double l1_value(const Vector& values) const;
};

std::vector<ConstraintRow> build_residual_rows(const ChannelPlant& plant, const SwitchedOutputModel& model,
                                               const SwitchingAutomaton& automaton,
                                               const SynthesisConfig& config, const DecisionLayout& layout);

std::vector<ConstraintRow> build_performance_rows(const ChannelPlant& plant, const SwitchedOutputModel& model,
                                                  const SwitchingAutomaton& automaton,
                                                  const SynthesisConfig& config, const DecisionLayout& layout);

struct SynthesisLp {
  LinearProgram<double> lp;
  Index gamma = -1;
  Index decision_count = 0;
  Index slack_count = 0;
};

/// minimize gamma over (Q, Z, gamma, slacks). Identical entry forms share one
/// absolute-value slack and identical rows are emitted once.
SynthesisLp assemble_lp(const std::vector<ConstraintRow>& residual_rows,
                        const std::vector<ConstraintRow>& performance_rows, const SynthesisConfig& config,
                        const DecisionLayout& layout);

enum class SynthesisStatus { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(SynthesisStatus s);

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::numerical_failure;
  std::string diagnostic;
  ResidualMode mode = ResidualMode::exact;
  double eps_bar = 0.0;
  /// Max performance row sum at the returned factors.
  double gamma_bar = 0.0;
  double lp_objective = 0.0;
  /// Max residual row sum at the returned factors.
  double eps_achieved = 0.0;
  /// gamma_bar / (1 - eps_bar); equals gamma_bar in exact mode.
  double certified_bound = 0.0;
  SwitchingFIR Q;
  SwitchingFIR Z;
  /// Estimator xhat = T y_a, T = -Z. Only an exact estimator in exact mode.
  SwitchingFIR T;
  Index lp_variables = 0;
  Index lp_constraints = 0;
  Index lp_iterations = 0;

  bool ok() const { return status == SynthesisStatus::optimal; }
};

SynthesisResult synthesize(const ChannelPlant& plant, const SwitchedOutputModel& model,
                           const SwitchingAutomaton& automaton, const SynthesisConfig& config);

double certified_bound(double gamma_bar, ResidualMode mode, double eps_bar);

struct RowMaxima {
  double residual = 0.0;
  double performance = 0.0;
};

/// Re-evaluates every constraint row at given factors.
RowMaxima evaluate_factors(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                           const SwitchedOutputModel& model, const SwitchingAutomaton& automaton,
                           std::size_t fir_length);

struct ObserverFactors {
  SwitchingFIR Q;
  SwitchingFIR Z;
  /// 1 - max over histories of ||Z_0 C^j - Q_0||_inf; the lag-0 solve of the
  /// observer recursion is nonsingular when positive.
  double lag0_margin = 0.0;
  std::string note;
};

ObserverFactors recover_observer_factors(const SynthesisResult& result, const SwitchedOutputModel& model);

Operator residual_operator(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                           const SwitchedOutputModel& model, std::span<const Mode> sigma,
                           Mode padding_mode = 0);

/// Map from the stacked input [w; x0bar] to -e in exact mode.
Operator performance_operator(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                              const SwitchedOutputModel& model, std::span<const Mode> sigma,
                              Mode padding_mode = 0);

/// || T Cbar + X (Lambda Abar - I) - I || with X = -I - Q.
double parametrization_residual(const SwitchingFIR& t, const SwitchingFIR& q, const ChannelPlant& plant,
                                const SwitchedOutputModel& model, std::span<const Mode> sigma,
                                Mode padding_mode = 0);

/// Uniformly random admissible sequence; deterministic for a given engine state.
ModeSequence sample_sequence(const SwitchingAutomaton& automaton, std::size_t length, std::mt19937_64& rng);

struct CertificationSample {
  ModeSequence sigma;
  double residual_norm = 0.0;
  double performance_norm = 0.0;
  double parametrization_residual_norm = 0.0;
};

struct CertificationReport {
  Index horizon = 0;
  std::vector<CertificationSample> samples;
  double max_residual = 0.0;
  double max_performance = 0.0;
  double max_parametrization_residual = 0.0;
};

/// Operator-level check of the synthesized factors along sampled sigma.
CertificationReport certify(const SynthesisResult& result, const ChannelPlant& plant,
                            const SwitchedOutputModel& model, const SwitchingAutomaton& automaton,
                            Index horizon, std::size_t samples, std::uint64_t seed);

}  // namespace switchguard
