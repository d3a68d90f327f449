#pragma once

// Plant, measurement channels, DoS selection masks and the FIR switching
// operator class whose coefficients are indexed by a window of recent modes.

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "switchguard/operator.hpp"

namespace switchguard {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Operator = TruncatedOperator<double>;
using SignalD = Signal<double>;

/// Switching mode id. Mode 0 is the nominal (attack-free) mode.
using Mode = int;
using ModeSequence = std::vector<Mode>;

struct Channel {
  Matrix C;
  Matrix D;
};

class ChannelPlant {
 public:
  ChannelPlant(Matrix a, Matrix b, std::vector<Channel> channels, double x0_bound = 1.0);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const std::vector<Channel>& channels() const { return channels_; }
  double x0_bound() const { return x0_bound_; }

  Index state_dim() const { return a_.rows(); }
  Index disturbance_dim() const { return b_.cols(); }
  Index output_dim() const { return stacked_c_.rows(); }
  std::size_t channel_count() const { return channels_.size(); }
  /// First stacked output row of channel i.
  Index channel_offset(std::size_t i) const { return offsets_.at(i); }

  /// Nominal stacked [C_1; ...; C_N] and [D_1; ...; D_N].
  const Matrix& stacked_C() const { return stacked_c_; }
  const Matrix& stacked_D() const { return stacked_d_; }

 private:
  Matrix a_, b_;
  std::vector<Channel> channels_;
  double x0_bound_;
  std::vector<Index> offsets_;
  Matrix stacked_c_, stacked_d_;
};

/// Channels (0-based) that reach the estimator.
struct SelectionMask {
  std::set<std::size_t> delivered;

  static SelectionMask all(std::size_t channel_count);
  /// Block-diagonal 0/1 selector E over the stacked outputs.
  Matrix selector(const ChannelPlant& plant) const;
  bool operator==(const SelectionMask&) const = default;
};

struct ModeMatrices {
  Matrix C;
  Matrix D;
  SelectionMask mask;
};

class SwitchedOutputModel {
 public:
  explicit SwitchedOutputModel(std::vector<ModeMatrices> modes);

  std::size_t mode_count() const { return modes_.size(); }
  const ModeMatrices& mode(Mode j) const;
  const Matrix& C(Mode j) const { return mode(j).C; }
  const Matrix& D(Mode j) const { return mode(j).D; }
  Index output_dim() const { return modes_.front().C.rows(); }
  Index state_dim() const { return modes_.front().C.cols(); }
  Index disturbance_dim() const { return modes_.front().D.cols(); }

 private:
  std::vector<ModeMatrices> modes_;
};

/// Stacks the channels and zeroes the rows of undelivered channels in every
/// mode. patterns[0] must deliver every channel. Duplicate masks are kept and
/// reported through `warnings` when given.
SwitchedOutputModel build_modes(const ChannelPlant& plant, std::span<const SelectionMask> patterns,
                                std::vector<std::string>* warnings = nullptr);

/// Window (sigma(t-L+1), ..., sigma(t)) of modes, oldest first.
struct ModeHistory {
  std::vector<Mode> modes;

  std::size_t length() const { return modes.size(); }
  Mode current() const { return modes.back(); }
  /// Mode at lag k, i.e. sigma(t - k).
  Mode at_lag(std::size_t k) const { return modes.at(modes.size() - 1 - k); }
  ModeHistory suffix(std::size_t len) const;
  std::string to_string() const;

  auto operator<=>(const ModeHistory&) const = default;
};

/// History of length L ending at time t of sigma, with positions before time
/// 0 filled by `padding_mode`.
ModeHistory window(std::span<const Mode> sigma, Index t, std::size_t length, Mode padding_mode);

/// Admissible switching set as a finite automaton over modes.
class SwitchingAutomaton {
 public:
  /// Every transition allowed, every mode may start.
  static SwitchingAutomaton complete(std::size_t mode_count, Mode padding_mode = 0);

  SwitchingAutomaton(std::vector<std::vector<bool>> allowed, std::vector<bool> initial,
                     Mode padding_mode = 0);

  std::size_t mode_count() const { return allowed_.size(); }
  Mode padding_mode() const { return padding_; }
  bool allows(Mode from, Mode to) const;
  bool can_start(Mode m) const;
  /// Modes reachable from some initial mode in zero or more steps.
  std::vector<bool> reachable() const;
  bool admissible(std::span<const Mode> sigma) const;
  bool is_complete() const;
  const std::vector<std::vector<bool>>& transitions() const { return allowed_; }
  const std::vector<bool>& initial() const { return initial_; }

 private:
  std::vector<std::vector<bool>> allowed_;
  std::vector<bool> initial_;
  Mode padding_;
};

/// Every window of length L that an admissible sequence can present at some
/// time, including startup windows whose oldest entries are padding. The
/// padding positions are not checked against the transition relation.
/// Sorted lexicographically, no duplicates.
std::vector<ModeHistory> enumerate_histories(const SwitchingAutomaton& automaton, std::size_t length);

/// FIR operator whose lag-k tap at time t is chosen by the last `memory`
/// modes: kernel(t, k) = coeffs(window(sigma, t, memory), k) for k < fir_length.
class SwitchingFIR {
 public:
  SwitchingFIR() = default;
  SwitchingFIR(std::size_t memory, std::size_t fir_length, Index out_dim, Index in_dim,
               bool output_only = false);

  std::size_t memory() const { return memory_; }
  std::size_t fir_length() const { return fir_length_; }
  Index out_dim() const { return out_dim_; }
  Index in_dim() const { return in_dim_; }
  bool output_only() const { return output_only_; }

  void set(const ModeHistory& history, std::size_t lag, Matrix tap);
  bool contains(const ModeHistory& history) const { return taps_.count(history) != 0; }
  /// Throws std::out_of_range naming the history when it has no coefficients.
  const Matrix& tap(const ModeHistory& history, std::size_t lag) const;
  std::vector<ModeHistory> histories() const;

  SwitchingFIR scaled(double c) const;

 private:
  std::size_t memory_ = 1;
  std::size_t fir_length_ = 1;
  Index out_dim_ = 0;
  Index in_dim_ = 0;
  bool output_only_ = false;
  std::map<ModeHistory, std::vector<Matrix>> taps_;
};

/// Operator with kernel(t, k) = tap(window(sigma, t, M), k).
Operator instantiate(const SwitchingFIR& fir, std::span<const Mode> sigma, Index horizon,
                     Mode padding_mode = 0);

/// Copies the taps of a mode-independent estimator to every history of the
/// automaton, so it can be driven along any sigma.
SwitchingFIR broadcast_to_modes(const SwitchingFIR& fir, const SwitchingAutomaton& automaton);

struct LiftedOutputs {
  Operator Cbar;
  Operator Dbar;
};

LiftedOutputs lift_outputs(const SwitchedOutputModel& model, std::span<const Mode> sigma,
                           Index horizon);

}  // namespace switchguard
