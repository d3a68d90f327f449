#include "switchguard/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "switchguard/parallel.hpp"
#include "switchguard/synthesis.hpp"

namespace switchguard {

namespace {

void check_sigma(std::span<const Mode> sigma, const SwitchedOutputModel& model) {
  if (sigma.empty()) throw std::invalid_argument("sigma is empty");
  for (std::size_t t = 0; t < sigma.size(); ++t) {
    if (sigma[t] < 0 || static_cast<std::size_t>(sigma[t]) >= model.mode_count()) {
      throw std::invalid_argument("sigma(" + std::to_string(t) + ") = " + std::to_string(sigma[t]) +
                                  " is not a mode id (have " + std::to_string(model.mode_count()) + ")");
    }
  }
}

Operator with_x0_scaled(const Operator& phi, Index mw, double scale, bool impulse) {
  Operator out(phi.horizon(), phi.out_dim(), phi.in_dim());
  for (Index t = 0; t < phi.horizon(); ++t) {
    for (const auto& [lag, m] : phi.taps(t)) {
      Matrix b = m;
      if (impulse && lag != t) {
        b.rightCols(b.cols() - mw).setZero();
      } else {
        b.rightCols(b.cols() - mw) *= scale;
      }
      out.set(t, lag, std::move(b));
    }
  }
  return out;
}

double error_norm(const ChannelPlant& plant, const SwitchedOutputModel& model, const Estimator& est,
                  std::span<const Mode> sigma, const WorstCaseOptions& options) {
  return induced_norm(scaled_error_operator(est, plant, model, sigma, options));
}

}  // namespace

Scenario Scenario::with_initial_state(ModeSequence sigma, SignalD w, const Vector& x0) {
  Scenario s{std::move(sigma), std::move(w), {}};
  if (s.sigma.empty()) throw std::invalid_argument("scenario: sigma is empty");
  s.x0bar = SignalD(s.horizon(), x0.size());
  s.x0bar[0] = x0;
  return s;
}

Scenario Scenario::zero(ModeSequence sigma, Index disturbance_dim, Index state_dim) {
  if (sigma.empty()) throw std::invalid_argument("scenario: sigma is empty");
  const auto h = static_cast<Index>(sigma.size());
  return {std::move(sigma), SignalD(h, disturbance_dim), SignalD(h, state_dim)};
}

void Scenario::validate(const ChannelPlant& plant, const SwitchedOutputModel& model,
                        const SwitchingAutomaton* automaton) const {
  check_sigma(sigma, model);
  if (w.horizon() != horizon() || x0bar.horizon() != horizon()) {
    throw std::invalid_argument("scenario: w and x0bar must have one sample per sigma entry");
  }
  if (w.dim() != plant.disturbance_dim()) throw std::invalid_argument("scenario: w has the wrong dimension");
  if (x0bar.dim() != plant.state_dim()) throw std::invalid_argument("scenario: x0bar has the wrong dimension");
  if (automaton != nullptr && !automaton->admissible(sigma)) {
    throw std::invalid_argument("scenario: sigma is not admissible under the automaton");
  }
}

PlantResponse simulate_plant(const ChannelPlant& plant, const SwitchedOutputModel& model, const Scenario& scenario) {
  scenario.validate(plant, model);
  const Index h = scenario.horizon();
  PlantResponse r{SignalD(h, plant.state_dim()), SignalD(h, model.output_dim())};
  for (Index t = 0; t < h; ++t) {
    r.x[t] = scenario.x0bar[t];
    if (t > 0) r.x[t] += plant.A() * r.x[t - 1] + plant.B() * scenario.w[t - 1];
    const Mode m = scenario.sigma[static_cast<std::size_t>(t)];
    r.y_a[t] = model.C(m) * r.x[t] + model.D(m) * scenario.w[t];
  }
  return r;
}

SignalD run_fir_estimator(const SwitchingFIR& t, const SignalD& y_a, std::span<const Mode> sigma, Mode padding_mode) {
  if (y_a.dim() != t.in_dim()) throw ShapeError("run_fir_estimator: y_a dimension does not match T");
  if (y_a.horizon() != static_cast<Index>(sigma.size())) {
    throw std::invalid_argument("run_fir_estimator: sigma and y_a lengths differ");
  }
  SignalD xhat(y_a.horizon(), t.out_dim());
  for (Index k = 0; k < y_a.horizon(); ++k) {
    const ModeHistory h = window(sigma, k, t.memory(), padding_mode);
    const auto taps = std::min<Index>(k + 1, static_cast<Index>(t.fir_length()));
    for (Index lag = 0; lag < taps; ++lag) xhat[k].noalias() += t.tap(h, static_cast<std::size_t>(lag)) * y_a[k - lag];
  }
  return xhat;
}

SignalD run_glo(const SwitchingFIR& q, const SwitchingFIR& z, const ChannelPlant& plant,
                const SwitchedOutputModel& model, const SignalD& y_a, std::span<const Mode> sigma,
                Mode padding_mode) {
  const Index n = plant.state_dim();
  if (q.out_dim() != n || q.in_dim() != n || z.out_dim() != n || z.in_dim() != model.output_dim()) {
    throw ShapeError("run_glo: factor dimensions do not match the plant");
  }
  if (y_a.dim() != model.output_dim() || y_a.horizon() != static_cast<Index>(sigma.size())) {
    throw ShapeError("run_glo: y_a does not match sigma or the output dimension");
  }
  check_sigma(sigma, model);
  const Index h = y_a.horizon();
  const Matrix I = Matrix::Identity(n, n);
  // v = (I - Lambda Abar) xhat and r = Cbar xhat - y_a, kept for the lagged terms.
  SignalD xhat(h, n), v(h, n), r(h, model.output_dim());
  for (Index t = 0; t < h; ++t) {
    const ModeHistory hq = window(sigma, t, q.memory(), padding_mode);
    const ModeHistory hz = window(sigma, t, z.memory(), padding_mode);
    const Matrix& C = model.C(sigma[static_cast<std::size_t>(t)]);
    const Vector prev = t > 0 ? Vector(plant.A() * xhat[t - 1]) : Vector::Zero(n);
    const Matrix& q0 = q.tap(hq, 0);
    const Matrix& z0 = z.tap(hz, 0);
    Vector rhs = (I + q0) * prev - z0 * y_a[t];
    for (Index k = 1; k <= t; ++k) {
      if (k < static_cast<Index>(q.fir_length())) rhs.noalias() -= q.tap(hq, static_cast<std::size_t>(k)) * v[t - k];
      if (k < static_cast<Index>(z.fir_length())) rhs.noalias() += z.tap(hz, static_cast<std::size_t>(k)) * r[t - k];
    }
    const Matrix solve = I + q0 - z0 * C;
    Eigen::FullPivLU<Matrix> lu(solve);
    if (!lu.isInvertible()) {
      throw std::domain_error("run_glo: singular lag-0 solve at t=" + std::to_string(t) + " for history " +
                              hq.to_string());
    }
    xhat[t] = lu.solve(rhs);
    v[t] = xhat[t] - prev;
    r[t] = C * xhat[t] - y_a[t];
  }
  return xhat;
}

SignalD run_estimator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                      const SignalD& y_a, std::span<const Mode> sigma, Mode padding_mode) {
  if (const auto* f = std::get_if<FirEstimator>(&est)) return run_fir_estimator(f->T, y_a, sigma, padding_mode);
  const auto& o = std::get<ObserverEstimator>(est);
  return run_glo(o.Q, o.Z, plant, model, y_a, sigma, padding_mode);
}

Operator estimator_operator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                            std::span<const Mode> sigma, Mode padding_mode) {
  check_sigma(sigma, model);
  const auto h = static_cast<Index>(sigma.size());
  if (const auto* f = std::get_if<FirEstimator>(&est)) return instantiate(f->T, sigma, h, padding_mode);
  const auto& o = std::get<ObserverEstimator>(est);
  const Operator E = residual_operator(o.Q, o.Z, plant, model, sigma, padding_mode);
  const Operator I = identity_operator<double>(plant.state_dim(), h);
  return -(causal_inverse(I - E) * instantiate(o.Z, sigma, h, padding_mode));
}

Operator error_operator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                        std::span<const Mode> sigma, Mode padding_mode) {
  const Operator T = estimator_operator(est, plant, model, sigma, padding_mode);
  const auto h = static_cast<Index>(sigma.size());
  const Index n = plant.state_dim();
  const LiftedOutputs lifted = lift_outputs(model, sigma, h);
  const Operator R = resolvent_of_state<double>(plant.A(), h);
  const Operator shifted_B = compose(delay<double>(1, n, h), make_diagonal<double>(plant.B(), h));
  const Operator I = identity_operator<double>(n, h);
  const Operator state_gain = T * lifted.Cbar - I;  // e = (T Cbar - I) x + T Dbar w
  const Operator x_from_x0 = R;
  const Operator x_from_w = R * shifted_B;
  return hstack(state_gain * x_from_w + T * lifted.Dbar, state_gain * x_from_x0);
}

Trace simulate(const ChannelPlant& plant, const SwitchedOutputModel& model, const Estimator& est,
               const Scenario& scenario, Mode padding_mode) {
  PlantResponse pr = simulate_plant(plant, model, scenario);
  Trace tr;
  tr.x_hat = run_estimator(est, plant, model, pr.y_a, scenario.sigma, padding_mode);
  tr.e = SignalD(scenario.horizon(), plant.state_dim());
  for (Index t = 0; t < scenario.horizon(); ++t) tr.e[t] = tr.x_hat[t] - pr.x[t];
  tr.sup_error = tr.e.sup_norm();
  tr.x = std::move(pr.x);
  tr.y_a = std::move(pr.y_a);
  return tr;
}

Operator scaled_error_operator(const Estimator& est, const ChannelPlant& plant, const SwitchedOutputModel& model,
                               std::span<const Mode> sigma, const WorstCaseOptions& options) {
  return with_x0_scaled(error_operator(est, plant, model, sigma, options.padding_mode), plant.disturbance_dim(),
                        plant.x0_bound(), options.initial == InitialCondition::impulse);
}

WorstCase worst_case_inputs(const ChannelPlant& plant, const SwitchedOutputModel& model, const Estimator& est,
                            std::span<const Mode> sigma, const WorstCaseOptions& options) {
  const Operator phi = scaled_error_operator(est, plant, model, sigma, options);
  const Index mw = plant.disturbance_dim();
  const Index n = plant.state_dim();
  WorstCase best;
  best.value = -1.0;
  Index best_t = 0;
  for (Index t = 0; t < phi.horizon(); ++t) {
    Index row = 0;
    double v = -1.0;
    for (Index i = 0; i < phi.out_dim(); ++i) {
      const double s = row_sum(phi, t, i);
      if (s > v) {
        v = s;
        row = i;
      }
    }
    if (v > best.value) {
      best.value = v;
      best.row = row;
      best_t = t;
    }
  }
  best.time = best_t;
  const RowGain<double> g = row_gain(phi, best_t);
  const Index h = phi.horizon();
  best.scenario = Scenario::zero(ModeSequence(sigma.begin(), sigma.end()), mw, n);
  for (Index s = 0; s < h; ++s) {
    best.scenario.w[s] = g.witness[s].head(mw);
    if (options.initial == InitialCondition::impulse && s > 0) continue;
    best.scenario.x0bar[s] = plant.x0_bound() * g.witness[s].tail(n);
  }
  return best;
}

const char* to_string(AttackStrategy s) { return s == AttackStrategy::exhaustive ? "exhaustive" : "greedy"; }

AttackResult attack_search(const ChannelPlant& plant, const SwitchedOutputModel& model,
                           const SwitchingAutomaton& automaton, const Estimator& est, Index horizon,
                           AttackStrategy strategy, const WorstCaseOptions& options) {
  if (horizon < 1) throw std::invalid_argument("attack_search: horizon must be >= 1");
  if (automaton.mode_count() != model.mode_count()) {
    throw std::invalid_argument("attack_search: automaton and model mode counts differ");
  }
  const auto modes = static_cast<std::uint64_t>(model.mode_count());
  AttackResult out;
  if (strategy == AttackStrategy::greedy) {
    ModeSequence sigma;
    for (Index t = 0; t < horizon; ++t) {
      Mode pick = -1;
      double pick_value = -1.0;
      for (Mode m = 0; m < static_cast<Mode>(modes); ++m) {
        if (t == 0 ? !automaton.can_start(m) : !automaton.allows(sigma.back(), m)) continue;
        sigma.push_back(m);
        const double v = error_norm(plant, model, est, sigma, options);
        ++out.evaluated;
        sigma.pop_back();
        if (v > pick_value) {
          pick_value = v;
          pick = m;
        }
      }
      if (pick < 0) throw std::runtime_error("attack_search: no admissible continuation at t=" + std::to_string(t));
      sigma.push_back(pick);
      out.value = pick_value;
    }
    out.sigma = std::move(sigma);
    return out;
  }

  std::uint64_t total = 1;
  for (Index t = 0; t < horizon; ++t) {
    if (total > max_exhaustive_sequences / modes) {
      throw std::invalid_argument("attack_search: " + std::to_string(modes) + "^" + std::to_string(horizon) +
                                  " sequences exceed the exhaustive limit of 2^20");
    }
    total *= modes;
  }
  auto decode = [&](std::uint64_t code) {
    ModeSequence sigma(static_cast<std::size_t>(horizon));
    for (Index t = horizon - 1; t >= 0; --t) {
      sigma[static_cast<std::size_t>(t)] = static_cast<Mode>(code % modes);
      code /= modes;
    }
    return sigma;
  };
  std::vector<double> values(static_cast<std::size_t>(total), -1.0);
  parallel_for(static_cast<std::size_t>(total), [&](std::size_t i) {
    const ModeSequence sigma = decode(i);
    if (automaton.admissible(sigma)) values[i] = error_norm(plant, model, est, sigma, options);
  });
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) continue;
    ++out.evaluated;
    if (best == values.size() || values[i] > values[best]) best = i;
  }
  if (best == values.size()) throw std::runtime_error("attack_search: no admissible sequence of this horizon");
  out.sigma = decode(best);
  out.value = values[best];
  return out;
}

}  // namespace switchguard
