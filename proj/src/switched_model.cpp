#include "switchguard/switched_model.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace switchguard {

ChannelPlant::ChannelPlant(Matrix a, Matrix b, std::vector<Channel> channels, double x0_bound)
    : a_(std::move(a)), b_(std::move(b)), channels_(std::move(channels)), x0_bound_(x0_bound) {
  if (a_.rows() < 1 || a_.rows() != a_.cols()) throw ShapeError("plant: A must be square, n >= 1");
  if (b_.rows() != a_.rows() || b_.cols() < 1) {
    throw ShapeError("plant: B must have n rows and at least one column");
  }
  if (channels_.empty()) throw ShapeError("plant: no measurement channels");
  if (!(x0_bound_ >= 0.0)) throw std::invalid_argument("plant: x0_bound must be nonnegative");
  Index rows = 0;
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    const auto& ch = channels_[i];
    if (ch.C.cols() != a_.rows()) {
      throw ShapeError("plant: channel " + std::to_string(i) + " C has " +
                       std::to_string(ch.C.cols()) + " columns, expected " +
                       std::to_string(a_.rows()));
    }
    if (ch.D.cols() != b_.cols()) {
      throw ShapeError("plant: channel " + std::to_string(i) + " D has " +
                       std::to_string(ch.D.cols()) + " columns, expected " +
                       std::to_string(b_.cols()));
    }
    if (ch.C.rows() < 1 || ch.D.rows() != ch.C.rows()) {
      throw ShapeError("plant: channel " + std::to_string(i) + " C and D row counts differ");
    }
    offsets_.push_back(rows);
    rows += ch.C.rows();
  }
  stacked_c_.resize(rows, a_.rows());
  stacked_d_.resize(rows, b_.cols());
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    const Index p = channels_[i].C.rows();
    stacked_c_.middleRows(offsets_[i], p) = channels_[i].C;
    stacked_d_.middleRows(offsets_[i], p) = channels_[i].D;
  }
}

SelectionMask SelectionMask::all(std::size_t channel_count) {
  SelectionMask m;
  for (std::size_t i = 0; i < channel_count; ++i) m.delivered.insert(i);
  return m;
}

Matrix SelectionMask::selector(const ChannelPlant& plant) const {
  Matrix e = Matrix::Zero(plant.output_dim(), plant.output_dim());
  for (std::size_t i : delivered) {
    if (i >= plant.channel_count()) {
      throw std::out_of_range("selection mask: channel " + std::to_string(i) + " does not exist");
    }
    const Index p = plant.channels()[i].C.rows();
    e.block(plant.channel_offset(i), plant.channel_offset(i), p, p).setIdentity();
  }
  return e;
}

SwitchedOutputModel::SwitchedOutputModel(std::vector<ModeMatrices> modes) : modes_(std::move(modes)) {
  if (modes_.empty()) throw ShapeError("switched model: no modes");
  for (const auto& m : modes_) {
    if (m.C.rows() != modes_.front().C.rows() || m.C.cols() != modes_.front().C.cols() ||
        m.D.rows() != modes_.front().D.rows() || m.D.cols() != modes_.front().D.cols()) {
      throw ShapeError("switched model: modes differ in shape");
    }
  }
}

const ModeMatrices& SwitchedOutputModel::mode(Mode j) const {
  if (j < 0 || static_cast<std::size_t>(j) >= modes_.size()) {
    throw std::out_of_range("mode " + std::to_string(j) + " out of range (have " +
                            std::to_string(modes_.size()) + ")");
  }
  return modes_[static_cast<std::size_t>(j)];
}

SwitchedOutputModel build_modes(const ChannelPlant& plant, std::span<const SelectionMask> patterns,
                                std::vector<std::string>* warnings) {
  if (patterns.empty()) throw std::invalid_argument("build_modes: no selection masks");
  if (patterns.front() != SelectionMask::all(plant.channel_count())) {
    throw std::invalid_argument("build_modes: mask 0 must deliver every channel");
  }
  std::vector<ModeMatrices> modes;
  for (std::size_t j = 0; j < patterns.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (patterns[i] == patterns[j] && warnings != nullptr) {
        warnings->push_back("mask " + std::to_string(j) + " duplicates mask " + std::to_string(i));
      }
    }
    const Matrix e = patterns[j].selector(plant);
    modes.push_back({e * plant.stacked_C(), e * plant.stacked_D(), patterns[j]});
  }
  return SwitchedOutputModel(std::move(modes));
}

ModeHistory ModeHistory::suffix(std::size_t len) const {
  if (len > modes.size()) throw std::out_of_range("ModeHistory::suffix: too long");
  return ModeHistory{std::vector<Mode>(modes.end() - static_cast<std::ptrdiff_t>(len), modes.end())};
}

std::string ModeHistory::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < modes.size(); ++i) os << (i ? "," : "") << modes[i];
  os << ')';
  return os.str();
}

ModeHistory window(std::span<const Mode> sigma, Index t, std::size_t length, Mode padding_mode) {
  if (length < 1) throw std::invalid_argument("window: length must be >= 1");
  if (t < 0 || t >= static_cast<Index>(sigma.size())) throw std::out_of_range("window: t out of range");
  ModeHistory h;
  h.modes.reserve(length);
  for (Index s = t - static_cast<Index>(length) + 1; s <= t; ++s) {
    h.modes.push_back(s < 0 ? padding_mode : sigma[static_cast<std::size_t>(s)]);
  }
  return h;
}

SwitchingAutomaton SwitchingAutomaton::complete(std::size_t mode_count, Mode padding_mode) {
  return SwitchingAutomaton(std::vector<std::vector<bool>>(mode_count, std::vector<bool>(mode_count, true)),
                            std::vector<bool>(mode_count, true), padding_mode);
}

SwitchingAutomaton::SwitchingAutomaton(std::vector<std::vector<bool>> allowed, std::vector<bool> initial,
                                       Mode padding_mode)
    : allowed_(std::move(allowed)), initial_(std::move(initial)), padding_(padding_mode) {
  if (allowed_.empty()) throw std::invalid_argument("automaton: no modes");
  for (const auto& row : allowed_) {
    if (row.size() != allowed_.size()) throw ShapeError("automaton: transition matrix is not square");
  }
  if (initial_.size() != allowed_.size()) throw ShapeError("automaton: initial set size mismatch");
  if (std::none_of(initial_.begin(), initial_.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("automaton: no initial mode");
  }
  if (padding_ < 0 || static_cast<std::size_t>(padding_) >= allowed_.size()) {
    throw std::out_of_range("automaton: padding mode out of range");
  }
}

bool SwitchingAutomaton::allows(Mode from, Mode to) const {
  const auto n = static_cast<Mode>(allowed_.size());
  if (from < 0 || to < 0 || from >= n || to >= n) return false;
  return allowed_[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
}

bool SwitchingAutomaton::can_start(Mode m) const {
  return m >= 0 && static_cast<std::size_t>(m) < initial_.size() && initial_[static_cast<std::size_t>(m)];
}

std::vector<bool> SwitchingAutomaton::reachable() const {
  std::vector<bool> seen = initial_;
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) continue;
      for (std::size_t j = 0; j < seen.size(); ++j) {
        if (allowed_[i][j] && !seen[j]) seen[j] = grew = true;
      }
    }
  }
  return seen;
}

bool SwitchingAutomaton::admissible(std::span<const Mode> sigma) const {
  if (sigma.empty()) return true;
  if (!can_start(sigma.front())) return false;
  for (std::size_t t = 1; t < sigma.size(); ++t) {
    if (!allows(sigma[t - 1], sigma[t])) return false;
  }
  return true;
}

bool SwitchingAutomaton::is_complete() const {
  for (const auto& row : allowed_) {
    if (std::find(row.begin(), row.end(), false) != row.end()) return false;
  }
  return std::find(initial_.begin(), initial_.end(), false) == initial_.end();
}

namespace {

// Appends every path of `remaining` further modes continuing from prefix.
void extend_paths(const SwitchingAutomaton& a, std::vector<Mode>& prefix, std::size_t remaining,
                  std::set<ModeHistory>& out) {
  if (remaining == 0) {
    out.insert(ModeHistory{prefix});
    return;
  }
  for (Mode m = 0; m < static_cast<Mode>(a.mode_count()); ++m) {
    if (!prefix.empty() && !a.allows(prefix.back(), m)) continue;
    prefix.push_back(m);
    extend_paths(a, prefix, remaining - 1, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<ModeHistory> enumerate_histories(const SwitchingAutomaton& automaton, std::size_t length) {
  if (length < 1) throw std::invalid_argument("enumerate_histories: length must be >= 1");
  std::set<ModeHistory> found;
  const auto reach = automaton.reachable();
  const auto modes = static_cast<Mode>(automaton.mode_count());
  // Windows lying entirely at t >= 0: start from any reachable mode.
  for (Mode m = 0; m < modes; ++m) {
    if (!reach[static_cast<std::size_t>(m)]) continue;
    std::vector<Mode> prefix{m};
    extend_paths(automaton, prefix, length - 1, found);
  }
  // Startup windows: `pad` virtual entries, then a path from an initial mode.
  for (std::size_t pad = 1; pad < length; ++pad) {
    for (Mode m = 0; m < modes; ++m) {
      if (!automaton.can_start(m)) continue;
      std::vector<Mode> prefix(pad, automaton.padding_mode());
      prefix.push_back(m);
      // extend_paths checks transitions from prefix.back(), which is now real.
      extend_paths(automaton, prefix, length - pad - 1, found);
    }
  }
  return {found.begin(), found.end()};
}

SwitchingFIR::SwitchingFIR(std::size_t memory, std::size_t fir_length, Index out_dim, Index in_dim,
                           bool output_only)
    : memory_(memory), fir_length_(fir_length), out_dim_(out_dim), in_dim_(in_dim),
      output_only_(output_only) {
  if (memory_ < 1 || fir_length_ < 1) throw std::invalid_argument("SwitchingFIR: memory and length must be >= 1");
  if (out_dim_ < 1 || in_dim_ < 1) throw ShapeError("SwitchingFIR: dimensions must be positive");
}

void SwitchingFIR::set(const ModeHistory& history, std::size_t lag, Matrix tap) {
  if (history.length() != memory_) throw std::invalid_argument("SwitchingFIR::set: history length != memory");
  if (lag >= fir_length_) throw std::out_of_range("SwitchingFIR::set: lag beyond FIR length");
  if (tap.rows() != out_dim_ || tap.cols() != in_dim_) throw ShapeError("SwitchingFIR::set: tap shape mismatch");
  auto [it, fresh] = taps_.try_emplace(history, fir_length_, Matrix::Zero(out_dim_, in_dim_));
  it->second[lag] = std::move(tap);
}

const Matrix& SwitchingFIR::tap(const ModeHistory& history, std::size_t lag) const {
  auto it = taps_.find(history);
  if (it == taps_.end()) {
    throw std::out_of_range("SwitchingFIR: no coefficients for history " + history.to_string());
  }
  return it->second.at(lag);
}

std::vector<ModeHistory> SwitchingFIR::histories() const {
  std::vector<ModeHistory> out;
  out.reserve(taps_.size());
  for (const auto& [h, _] : taps_) out.push_back(h);
  return out;
}

SwitchingFIR SwitchingFIR::scaled(double c) const {
  SwitchingFIR out = *this;
  for (auto& [h, taps] : out.taps_) {
    for (auto& m : taps) m *= c;
  }
  return out;
}

Operator instantiate(const SwitchingFIR& fir, std::span<const Mode> sigma, Index horizon,
                     Mode padding_mode) {
  if (static_cast<Index>(sigma.size()) != horizon) {
    throw std::invalid_argument("instantiate: sigma length must equal the horizon");
  }
  Operator op(horizon, fir.out_dim(), fir.in_dim());
  for (Index t = 0; t < horizon; ++t) {
    const ModeHistory h = window(sigma, t, fir.memory(), padding_mode);
    const Index last = std::min<Index>(t, static_cast<Index>(fir.fir_length()) - 1);
    for (Index k = 0; k <= last; ++k) op.set(t, k, fir.tap(h, static_cast<std::size_t>(k)));
  }
  return op;
}

SwitchingFIR broadcast_to_modes(const SwitchingFIR& fir, const SwitchingAutomaton& automaton) {
  const auto existing = fir.histories();
  if (existing.empty()) throw std::invalid_argument("broadcast_to_modes: estimator has no coefficients");
  const ModeHistory source = existing.front();
  SwitchingFIR out(fir.memory(), fir.fir_length(), fir.out_dim(), fir.in_dim(), fir.output_only());
  for (const auto& h : enumerate_histories(automaton, fir.memory())) {
    const ModeHistory& from = fir.contains(h) ? h : source;
    for (std::size_t k = 0; k < fir.fir_length(); ++k) out.set(h, k, fir.tap(from, k));
  }
  return out;
}

LiftedOutputs lift_outputs(const SwitchedOutputModel& model, std::span<const Mode> sigma, Index horizon) {
  if (static_cast<Index>(sigma.size()) != horizon) {
    throw std::invalid_argument("lift_outputs: sigma length must equal the horizon");
  }
  std::vector<Matrix> cs, ds;
  cs.reserve(sigma.size());
  ds.reserve(sigma.size());
  for (Mode m : sigma) {
    cs.push_back(model.C(m));
    ds.push_back(model.D(m));
  }
  return {make_diagonal<double>(std::span<const Matrix>(cs), horizon),
          make_diagonal<double>(std::span<const Matrix>(ds), horizon)};
}

}  // namespace switchguard
