#include "switchguard/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "switchguard/parallel.hpp"

namespace switchguard {

const char* to_string(ResidualMode m) { return m == ResidualMode::exact ? "exact" : "relaxed"; }

const char* to_string(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::optimal: return "optimal";
    case SynthesisStatus::infeasible: return "infeasible";
    case SynthesisStatus::unbounded: return "unbounded";
    case SynthesisStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

void SynthesisConfig::validate() const {
  if (memory < 1) throw std::invalid_argument("synthesis: memory M must be >= 1");
  if (fir_length < 1) throw std::invalid_argument("synthesis: FIR length N must be >= 1");
  if (!(eps_bar >= 0.0 && eps_bar < 1.0)) throw std::invalid_argument("synthesis: eps_bar must lie in [0, 1)");
  if (verify_horizon < 1) throw std::invalid_argument("synthesis: verify_horizon must be >= 1");
}

DecisionLayout::DecisionLayout(std::vector<ModeHistory> histories, std::size_t fir_length, Index state_dim,
                               Index output_dim)
    : histories_(std::move(histories)), fir_length_(fir_length), n_(state_dim), p_(output_dim) {
  std::sort(histories_.begin(), histories_.end());
  histories_.erase(std::unique(histories_.begin(), histories_.end()), histories_.end());
  per_history_ = static_cast<Index>(fir_length_) * (n_ * p_ + n_ * n_);
  size_ = per_history_ * static_cast<Index>(histories_.size());
}

std::size_t DecisionLayout::history_index(const ModeHistory& h) const {
  auto it = std::lower_bound(histories_.begin(), histories_.end(), h);
  if (it == histories_.end() || *it != h) {
    throw std::out_of_range("DecisionLayout: history " + h.to_string() + " has no variables");
  }
  return static_cast<std::size_t>(it - histories_.begin());
}

Index DecisionLayout::id(Factor f, const ModeHistory& h, std::size_t lag, Index row, Index col) const {
  const Index base = static_cast<Index>(history_index(h)) * per_history_;
  const Index k = static_cast<Index>(lag);
  if (f == Factor::Z) return base + k * n_ * p_ + row * p_ + col;
  return base + static_cast<Index>(fir_length_) * n_ * p_ + k * n_ * n_ + row * n_ + col;
}

std::string DecisionLayout::name(Index id) const {
  const Index h = id / per_history_;
  Index r = id % per_history_;
  std::ostringstream os;
  std::string hist;
  for (Mode m : histories_[static_cast<std::size_t>(h)].modes) hist += std::to_string(m);
  const Index z_block = static_cast<Index>(fir_length_) * n_ * p_;
  if (r < z_block) {
    os << "Z_h" << hist << "_k" << r / (n_ * p_) << '_' << (r % (n_ * p_)) / p_ << '_' << r % p_;
  } else {
    r -= z_block;
    os << "Q_h" << hist << "_k" << r / (n_ * n_) << '_' << (r % (n_ * n_)) / n_ << '_' << r % n_;
  }
  return os.str();
}

SwitchingFIR DecisionLayout::unpack(Factor f, const Vector& values) const {
  const Index cols = f == Factor::Z ? p_ : n_;
  SwitchingFIR fir(histories_.front().length(), fir_length_, n_, cols);
  for (const auto& h : histories_) {
    for (std::size_t k = 0; k < fir_length_; ++k) {
      Matrix tap(n_, cols);
      for (Index i = 0; i < n_; ++i) {
        for (Index j = 0; j < cols; ++j) tap(i, j) = values(id(f, h, k, i, j));
      }
      fir.set(h, k, std::move(tap));
    }
  }
  return fir;
}

Vector DecisionLayout::pack(const SwitchingFIR& q, const SwitchingFIR& z) const {
  Vector v = Vector::Zero(size_);
  for (const auto& h : histories_) {
    for (std::size_t k = 0; k < fir_length_; ++k) {
      const Matrix& zt = z.tap(h, k);
      const Matrix& qt = q.tap(h, k);
      for (Index i = 0; i < n_; ++i) {
        for (Index j = 0; j < p_; ++j) v(id(Factor::Z, h, k, i, j)) = zt(i, j);
        for (Index j = 0; j < n_; ++j) v(id(Factor::Q, h, k, i, j)) = qt(i, j);
      }
    }
  }
  return v;
}

double AffineForm::evaluate(const Vector& values) const {
  double v = constant;
  for (const auto& [id, c] : terms) v += c * values(id);
  return v;
}

double ConstraintRow::l1_value(const Vector& values) const {
  double total = 0.0;
  for (const auto& e : entries) total += std::abs(e.form.evaluate(values));
  return total;
}

namespace {

class FormBuilder {
 public:
  void add(Index id, double c) {
    if (c != 0.0) acc_[id] += c;
  }
  void add_constant(double c) { constant_ += c; }

  AffineForm finish() const {
    AffineForm f;
    f.constant = constant_;
    for (const auto& [id, c] : acc_) {
      if (c != 0.0) f.terms.emplace_back(id, c);
    }
    return f;
  }

 private:
  std::map<Index, double> acc_;
  double constant_ = 0.0;
};

void check_problem(const ChannelPlant& plant, const SwitchedOutputModel& model,
                   const SwitchingAutomaton& automaton) {
  if (model.state_dim() != plant.state_dim() || model.disturbance_dim() != plant.disturbance_dim()) {
    throw ShapeError("synthesis: switched model does not match the plant");
  }
  if (automaton.mode_count() != model.mode_count()) {
    throw ShapeError("synthesis: automaton has " + std::to_string(automaton.mode_count()) +
                     " modes, model has " + std::to_string(model.mode_count()));
  }
}

}  // namespace

std::vector<ConstraintRow> build_residual_rows(const ChannelPlant& plant, const SwitchedOutputModel& model,
                                               const SwitchingAutomaton& automaton,
                                               const SynthesisConfig& config, const DecisionLayout& layout) {
  check_problem(plant, model, automaton);
  const Index n = plant.state_dim();
  const Index p = model.output_dim();
  const std::size_t N = config.fir_length;
  const Matrix& A = plant.A();
  std::vector<ConstraintRow> rows;
  for (const auto& h : enumerate_histories(automaton, config.extended_length())) {
    const ModeHistory hm = h.suffix(config.memory);
    for (Index i = 0; i < n; ++i) {
      ConstraintRow row{h, i, RowKind::residual, {}};
      // lag-k entry: [k=1] A + Z_k C^{sigma(t-k)} + Q_{k-1} A - Q_k
      for (std::size_t k = 0; k <= N; ++k) {
        for (Index j = 0; j < n; ++j) {
          FormBuilder f;
          if (k == 1) f.add_constant(A(i, j));
          if (k < N) {
            const Matrix& C = model.C(h.at_lag(k));
            for (Index l = 0; l < p; ++l) f.add(layout.id(Factor::Z, hm, k, i, l), C(l, j));
            f.add(layout.id(Factor::Q, hm, k, i, j), -1.0);
          }
          if (k >= 1) {
            for (Index l = 0; l < n; ++l) f.add(layout.id(Factor::Q, hm, k - 1, i, l), A(l, j));
          }
          row.entries.push_back({static_cast<Index>(k), j, f.finish()});
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ConstraintRow> build_performance_rows(const ChannelPlant& plant, const SwitchedOutputModel& model,
                                                  const SwitchingAutomaton& automaton,
                                                  const SynthesisConfig& config, const DecisionLayout& layout) {
  check_problem(plant, model, automaton);
  const Index n = plant.state_dim();
  const Index p = model.output_dim();
  const Index mw = plant.disturbance_dim();
  const std::size_t N = config.fir_length;
  const Matrix& B = plant.B();
  std::vector<ConstraintRow> rows;
  for (const auto& h : enumerate_histories(automaton, config.extended_length())) {
    const ModeHistory hm = h.suffix(config.memory);
    for (Index i = 0; i < n; ++i) {
      ConstraintRow row{h, i, RowKind::performance, {}};
      // w block, lag k: [k=1] B + Z_k D^{sigma(t-k)} + Q_{k-1} B
      for (std::size_t k = 0; k <= N; ++k) {
        for (Index j = 0; j < mw; ++j) {
          FormBuilder f;
          if (k == 1) f.add_constant(B(i, j));
          if (k < N) {
            const Matrix& D = model.D(h.at_lag(k));
            for (Index l = 0; l < p; ++l) f.add(layout.id(Factor::Z, hm, k, i, l), D(l, j));
          }
          if (k >= 1) {
            for (Index l = 0; l < n; ++l) f.add(layout.id(Factor::Q, hm, k - 1, i, l), B(l, j));
          }
          row.entries.push_back({static_cast<Index>(k), j, f.finish()});
        }
      }
      // x0bar block, lag k: [k=0] I + Q_k
      for (std::size_t k = 0; k < N; ++k) {
        for (Index j = 0; j < n; ++j) {
          FormBuilder f;
          if (k == 0 && i == j) f.add_constant(1.0);
          f.add(layout.id(Factor::Q, hm, k, i, j), 1.0);
          row.entries.push_back({static_cast<Index>(k), mw + j, f.finish()});
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

SynthesisLp assemble_lp(const std::vector<ConstraintRow>& residual_rows,
                        const std::vector<ConstraintRow>& performance_rows, const SynthesisConfig& config,
                        const DecisionLayout& layout) {
  if (residual_rows.empty() && performance_rows.empty()) {
    throw std::invalid_argument("assemble_lp: no constraint rows");
  }
  const Index decisions = layout.size();
  const Index gamma = decisions;
  std::map<AffineForm, Index> slack_of;  // slack ordinal, in first-seen order
  std::vector<const AffineForm*> slack_forms;

  struct RowSum {
    std::vector<Index> slacks;
    double constant;
    auto operator<=>(const RowSum&) const = default;
  };
  auto collect = [&](const ConstraintRow& row) {
    RowSum rs{{}, 0.0};
    for (const auto& e : row.entries) {
      if (e.form.is_constant()) {
        rs.constant += std::abs(e.form.constant);
        continue;
      }
      auto [it, fresh] = slack_of.try_emplace(e.form, static_cast<Index>(slack_forms.size()));
      if (fresh) slack_forms.push_back(&it->first);
      rs.slacks.push_back(it->second);
    }
    std::sort(rs.slacks.begin(), rs.slacks.end());
    return rs;
  };

  std::vector<RowSum> perf;
  std::vector<RowSum> resid;
  std::vector<AffineForm> equalities;
  {
    std::set<RowSum> seen_perf, seen_resid;
    for (const auto& r : performance_rows) {
      auto rs = collect(r);
      if (seen_perf.insert(rs).second) perf.push_back(std::move(rs));
    }
    if (config.mode == ResidualMode::relaxed) {
      for (const auto& r : residual_rows) {
        auto rs = collect(r);
        if (seen_resid.insert(rs).second) resid.push_back(std::move(rs));
      }
    } else {
      std::set<AffineForm> seen_eq;
      for (const auto& r : residual_rows) {
        for (const auto& e : r.entries) {
          if (e.form.is_constant() && e.form.constant == 0.0) continue;
          if (seen_eq.insert(e.form).second) equalities.push_back(e.form);
        }
      }
    }
  }

  SynthesisLp out;
  out.decision_count = decisions;
  out.gamma = gamma;
  out.slack_count = static_cast<Index>(slack_forms.size());
  const Index total = decisions + 1 + out.slack_count;
  auto& lp = out.lp;
  lp = LinearProgram<double>(total);
  for (Index j = 0; j < decisions; ++j) {
    lp.lower[static_cast<std::size_t>(j)] = -LinearProgram<double>::inf;
    lp.names[static_cast<std::size_t>(j)] = layout.name(j);
  }
  lp.names[static_cast<std::size_t>(gamma)] = "gamma";
  for (Index s = 0; s < out.slack_count; ++s) lp.names[static_cast<std::size_t>(gamma + 1 + s)] = "s" + std::to_string(s);
  lp.objective(gamma) = 1.0;

  auto slack_var = [&](Index s) { return gamma + 1 + s; };
  for (Index s = 0; s < out.slack_count; ++s) {
    const AffineForm& f = *slack_forms[static_cast<std::size_t>(s)];
    for (double sign : {1.0, -1.0}) {
      Vector c = Vector::Zero(total);
      for (const auto& [id, a] : f.terms) c(id) = sign * a;
      c(slack_var(s)) = -1.0;
      lp.add_constraint(std::move(c), Relation::less_equal, -sign * f.constant);
    }
  }
  for (const auto& rs : perf) {
    Vector c = Vector::Zero(total);
    for (Index s : rs.slacks) c(slack_var(s)) += 1.0;
    c(gamma) = -1.0;
    lp.add_constraint(std::move(c), Relation::less_equal, -rs.constant);
  }
  for (const auto& rs : resid) {
    Vector c = Vector::Zero(total);
    for (Index s : rs.slacks) c(slack_var(s)) += 1.0;
    lp.add_constraint(std::move(c), Relation::less_equal, config.eps_bar - rs.constant);
  }
  for (const auto& f : equalities) {
    Vector c = Vector::Zero(total);
    for (const auto& [id, a] : f.terms) c(id) = a;
    lp.add_constraint(std::move(c), Relation::equal, -f.constant);
  }
  return out;
}

double certified_bound(double gamma_bar, ResidualMode mode, double eps_bar) {
  if (mode == ResidualMode::exact) return gamma_bar;
  return gamma_bar + eps_bar / (1.0 - eps_bar) * gamma_bar;
}

namespace {

double max_l1(const std::vector<ConstraintRow>& rows, const Vector& values) {
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.l1_value(values));
  return best;
}

}  // namespace

SynthesisResult synthesize(const ChannelPlant& plant, const SwitchedOutputModel& model,
                           const SwitchingAutomaton& automaton, const SynthesisConfig& config) {
  config.validate();
  check_problem(plant, model, automaton);
  DecisionLayout layout(enumerate_histories(automaton, config.memory), config.fir_length, plant.state_dim(),
                        model.output_dim());
  const auto residual = build_residual_rows(plant, model, automaton, config, layout);
  const auto performance = build_performance_rows(plant, model, automaton, config, layout);
  const SynthesisLp slp = assemble_lp(residual, performance, config, layout);

  SynthesisResult result;
  result.mode = config.mode;
  result.eps_bar = config.mode == ResidualMode::exact ? 0.0 : config.eps_bar;
  result.lp_variables = slp.lp.variable_count;
  result.lp_constraints = static_cast<Index>(slp.lp.constraints.size());

  const LpSolution<double> sol = solve(slp.lp, config.lp);
  result.lp_iterations = sol.iterations;
  switch (sol.status) {
    case LpStatus::optimal: result.status = SynthesisStatus::optimal; break;
    case LpStatus::infeasible:
      result.status = SynthesisStatus::infeasible;
      result.diagnostic =
          "no FIR factors of length N=" + std::to_string(config.fir_length) + " and memory M=" +
          std::to_string(config.memory) +
          (config.mode == ResidualMode::exact ? " satisfy the exact residual equality"
                                              : " keep the residual norm below eps_bar") +
          "; increase N (or M), or use relaxed mode with a larger eps_bar";
      return result;
    case LpStatus::unbounded:
      result.status = SynthesisStatus::unbounded;
      result.diagnostic = "LP unbounded: " + sol.message;
      return result;
    case LpStatus::numerical_failure:
      result.status = SynthesisStatus::numerical_failure;
      result.diagnostic = "LP solver failed: " + sol.message;
      return result;
  }

  const Vector decisions = sol.values.head(layout.size());
  result.lp_objective = sol.values(slp.gamma);
  result.Q = layout.unpack(Factor::Q, decisions);
  result.Z = layout.unpack(Factor::Z, decisions);
  result.T = result.Z.scaled(-1.0);
  result.gamma_bar = max_l1(performance, decisions);
  result.eps_achieved = max_l1(residual, decisions);
  result.certified_bound = certified_bound(result.gamma_bar, result.mode, result.eps_bar);
  return result;
}

RowMaxima evaluate_factors(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                           const SwitchedOutputModel& model, const SwitchingAutomaton& automaton,
                           std::size_t fir_length) {
  SynthesisConfig cfg;
  cfg.memory = q.memory();
  cfg.fir_length = fir_length;
  DecisionLayout layout(enumerate_histories(automaton, cfg.memory), fir_length, plant.state_dim(),
                        model.output_dim());
  const Vector values = layout.pack(q, z);
  return {max_l1(build_residual_rows(plant, model, automaton, cfg, layout), values),
          max_l1(build_performance_rows(plant, model, automaton, cfg, layout), values)};
}

ObserverFactors recover_observer_factors(const SynthesisResult& result, const SwitchedOutputModel& model) {
  if (!result.ok()) throw std::invalid_argument("recover_observer_factors: synthesis did not succeed");
  ObserverFactors f{result.Q, result.Z, 1.0, {}};
  double worst = 0.0;
  std::string worst_history;
  for (const auto& h : result.Q.histories()) {
    const Matrix lag0 = result.Z.tap(h, 0) * model.C(h.current()) - result.Q.tap(h, 0);
    const double norm = lag0.cwiseAbs().rowwise().sum().maxCoeff();
    if (norm >= worst) {
      worst = norm;
      worst_history = h.to_string();
    }
  }
  f.lag0_margin = 1.0 - worst;
  std::ostringstream os;
  os << "L = (I + Q)^{-1} Z is not formed; lag-0 residual norm " << worst << " at history "
     << worst_history << ", invertibility margin " << f.lag0_margin;
  f.note = os.str();
  return f;
}

namespace {

struct SigmaLifts {
  Operator shifted_A;  // Lambda Abar
  Operator shifted_B;  // Lambda Bbar
  LiftedOutputs outputs;
};

SigmaLifts lift_all(const ChannelPlant& plant, const SwitchedOutputModel& model, std::span<const Mode> sigma) {
  const auto h = static_cast<Index>(sigma.size());
  const Index n = plant.state_dim();
  const Operator shift = delay<double>(1, n, h);
  return {compose(shift, make_diagonal<double>(plant.A(), h)), compose(shift, make_diagonal<double>(plant.B(), h)),
          lift_outputs(model, sigma, h)};
}

}  // namespace

Operator residual_operator(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                           const SwitchedOutputModel& model, std::span<const Mode> sigma, Mode padding_mode) {
  const auto h = static_cast<Index>(sigma.size());
  const auto lifts = lift_all(plant, model, sigma);
  const Operator Qs = instantiate(q, sigma, h, padding_mode);
  const Operator Zs = instantiate(z, sigma, h, padding_mode);
  const Operator I = identity_operator<double>(plant.state_dim(), h);
  return lifts.shifted_A + Zs * lifts.outputs.Cbar + Qs * (lifts.shifted_A - I);
}

Operator performance_operator(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                              const SwitchedOutputModel& model, std::span<const Mode> sigma, Mode padding_mode) {
  const auto h = static_cast<Index>(sigma.size());
  const auto lifts = lift_all(plant, model, sigma);
  const Operator Qs = instantiate(q, sigma, h, padding_mode);
  const Operator Zs = instantiate(z, sigma, h, padding_mode);
  const Operator I = identity_operator<double>(plant.state_dim(), h);
  return hstack(lifts.shifted_B + Zs * lifts.outputs.Dbar + Qs * lifts.shifted_B, I + Qs);
}

double parametrization_residual(const SwitchingFIR& t, const SwitchingFIR& q, const ChannelPlant& plant,
                                const SwitchedOutputModel& model, std::span<const Mode> sigma, Mode padding_mode) {
  if (t.out_dim() != plant.state_dim() || t.in_dim() != model.output_dim() || q.out_dim() != plant.state_dim() ||
      q.in_dim() != plant.state_dim()) {
    throw ShapeError("parametrization_residual: factor dimensions do not match the plant");
  }
  const auto h = static_cast<Index>(sigma.size());
  const auto lifts = lift_all(plant, model, sigma);
  const Operator I = identity_operator<double>(plant.state_dim(), h);
  const Operator X = -I - instantiate(q, sigma, h, padding_mode);
  const Operator Ts = instantiate(t, sigma, h, padding_mode);
  return induced_norm(Ts * lifts.outputs.Cbar + X * (lifts.shifted_A - I) - I);
}

ModeSequence sample_sequence(const SwitchingAutomaton& automaton, std::size_t length, std::mt19937_64& rng) {
  ModeSequence sigma;
  sigma.reserve(length);
  std::vector<Mode> choices;
  for (std::size_t t = 0; t < length; ++t) {
    choices.clear();
    for (Mode m = 0; m < static_cast<Mode>(automaton.mode_count()); ++m) {
      if (t == 0 ? automaton.can_start(m) : automaton.allows(sigma.back(), m)) choices.push_back(m);
    }
    if (choices.empty()) {
      throw std::runtime_error("sample_sequence: automaton has no admissible continuation at t=" + std::to_string(t));
    }
    sigma.push_back(choices[static_cast<std::size_t>(rng() % choices.size())]);
  }
  return sigma;
}

CertificationReport certify(const SynthesisResult& result, const ChannelPlant& plant,
                            const SwitchedOutputModel& model, const SwitchingAutomaton& automaton, Index horizon,
                            std::size_t samples, std::uint64_t seed) {
  if (!result.ok()) throw std::invalid_argument("certify: synthesis did not succeed");
  CertificationReport report;
  report.horizon = horizon;
  std::mt19937_64 rng(seed);
  report.samples.resize(samples);
  for (auto& s : report.samples) s.sigma = sample_sequence(automaton, static_cast<std::size_t>(horizon), rng);
  const Mode pad = automaton.padding_mode();
  parallel_for(samples, [&](std::size_t i) {
    auto& s = report.samples[i];
    s.residual_norm = induced_norm(residual_operator(result.Q, result.Z, plant, model, s.sigma, pad));
    s.performance_norm = induced_norm(performance_operator(result.Q, result.Z, plant, model, s.sigma, pad));
    s.parametrization_residual_norm = parametrization_residual(result.T, result.Q, plant, model, s.sigma, pad);
  });
  for (const auto& s : report.samples) {
    report.max_residual = std::max(report.max_residual, s.residual_norm);
    report.max_performance = std::max(report.max_performance, s.performance_norm);
    report.max_parametrization_residual = std::max(report.max_parametrization_residual, s.parametrization_residual_norm);
  }
  return report;
}

}  // namespace switchguard
