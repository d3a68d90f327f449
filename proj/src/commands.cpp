#include "switchguard/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "switchguard/fixtures.hpp"
#include "switchguard/parallel.hpp"

namespace switchguard::cli {

namespace {

const char* tool_version() { return SWITCHGUARD_VERSION; }

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  }
}

std::string join(const ModeSequence& sigma, char sep) {
  std::string s;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (i > 0) s += sep;
    s += std::to_string(sigma[i]);
  }
  return s;
}

InitialCondition parse_initial(const std::string& s) {
  if (s == "sequence") return InitialCondition::sequence;
  if (s == "impulse") return InitialCondition::impulse;
  throw std::invalid_argument("--initial must be sequence or impulse, got \"" + s + "\"");
}

int status_exit(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::optimal: return exit_ok;
    case SynthesisStatus::infeasible: return exit_infeasible;
    default: return exit_numerical;
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot write " + path);
  f << content;
}

ProblemConfig example_problem(std::size_t mode_count, std::size_t fir_length) {
  auto patterns = fixtures::example_patterns();
  patterns.resize(mode_count);
  SynthesisConfig s;
  s.memory = 1;
  s.fir_length = fir_length;
  return ProblemConfig{fixtures::example_plant(), patterns, SwitchingAutomaton::complete(mode_count), s, 1, {}};
}

double max_tap_diff(const SwitchingFIR& t, const ModeHistory& h, const std::vector<Matrix>& printed) {
  double d = 0.0;
  for (std::size_t k = 0; k < printed.size() && k < t.fir_length(); ++k) {
    d = std::max(d, (t.tap(h, k) - printed[k]).cwiseAbs().maxCoeff());
  }
  return d;
}

void write_trace_csv(std::ostream& os, const Scenario& sc, const Trace& tr) {
  os << "t,sigma";
  for (Index i = 0; i < tr.x.dim(); ++i) os << ",x_" << i + 1;
  for (Index j = 0; j < tr.y_a.dim(); ++j) os << ",y_" << j + 1;
  for (Index i = 0; i < tr.x_hat.dim(); ++i) os << ",xhat_" << i + 1;
  for (Index i = 0; i < tr.e.dim(); ++i) os << ",e_" << i + 1;
  os << "\n";
  for (Index t = 0; t < sc.horizon(); ++t) {
    os << t << "," << sc.sigma[static_cast<std::size_t>(t)];
    for (const SignalD* s : {&tr.x, &tr.y_a, &tr.x_hat, &tr.e}) {
      for (Index i = 0; i < s->dim(); ++i) os << "," << format_number((*s)[t](i));
    }
    os << "\n";
  }
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

ModeSequence parse_sigma(const std::string& spec, std::size_t mode_count) {
  ModeSequence sigma;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = -1;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size() || v < 0 ||
        static_cast<std::size_t>(v) >= mode_count) {
      throw std::invalid_argument("sigma entry \"" + item + "\" is not a mode id in 0.." +
                                  std::to_string(mode_count - 1));
    }
    sigma.push_back(v);
  }
  if (sigma.empty()) throw std::invalid_argument("sigma is empty");
  return sigma;
}

LoadedBundle load_for_evaluation(const std::string& bundle_path, const std::string& override_config) {
  ResultBundle bundle = load_bundle(bundle_path);
  if (!bundle.result.ok()) {
    throw std::invalid_argument("bundle holds no estimator (status " + std::string(to_string(bundle.result.status)) + ")");
  }
  ProblemConfig problem = parse_config(bundle.config);
  const bool single_mode = problem.patterns.size() == 1;
  if (!override_config.empty()) {
    ProblemConfig other = load_config(override_config);
    if (other.plant.state_dim() != problem.plant.state_dim() || other.plant.output_dim() != problem.plant.output_dim() ||
        other.plant.disturbance_dim() != problem.plant.disturbance_dim()) {
      throw ConfigError(override_config, "plant dimensions differ from the bundle's plant");
    }
    problem = std::move(other);
  }
  SwitchedOutputModel model = problem.model();
  const SynthesisResult& r = bundle.result;
  Estimator est;
  auto adapt = [&](const SwitchingFIR& f) { return single_mode ? broadcast_to_modes(f, problem.automaton) : f; };
  if (r.mode == ResidualMode::exact) {
    est = FirEstimator{adapt(r.T)};
  } else {
    est = ObserverEstimator{adapt(r.Q), adapt(r.Z)};
  }
  return {std::move(bundle), std::move(problem), std::move(model), std::move(est)};
}

Scenario parse_scenario(const Json& j, const ProblemConfig& problem) {
  if (!j.is_object()) throw ConfigError("$", "scenario must be a JSON object");
  const std::size_t modes = problem.patterns.size();
  if (!j.contains("sigma") || !j["sigma"].is_array() || j["sigma"].empty()) {
    throw ConfigError("sigma", "expected a non-empty array of mode ids");
  }
  ModeSequence sigma;
  for (std::size_t i = 0; i < j["sigma"].size(); ++i) {
    const Json& v = j["sigma"][i];
    if (!v.is_number_integer() || v.get<int>() < 0 || static_cast<std::size_t>(v.get<int>()) >= modes) {
      throw ConfigError("sigma[" + std::to_string(i) + "]", "not a mode id");
    }
    sigma.push_back(v.get<int>());
  }
  const auto h = static_cast<Index>(sigma.size());
  const Index n = problem.plant.state_dim();
  const Index mw = problem.plant.disturbance_dim();
  Scenario sc = Scenario::zero(sigma, mw, n);
  if (j.contains("w")) {
    const Matrix w = matrix_from_json(j["w"], "w");
    if (w.rows() != h || w.cols() != mw) {
      throw ConfigError("w", "expected " + std::to_string(h) + " rows of " + std::to_string(mw) + " entries");
    }
    for (Index t = 0; t < h; ++t) sc.w[t] = w.row(t).transpose();
  }
  if (j.contains("x0") && j.contains("x0bar")) throw ConfigError("x0bar", "give either x0 or x0bar, not both");
  if (j.contains("x0")) {
    const Json& x = j["x0"];
    if (!x.is_array() || static_cast<Index>(x.size()) != n) throw ConfigError("x0", "expected " + std::to_string(n) + " numbers");
    for (Index i = 0; i < n; ++i) {
      if (!x[static_cast<std::size_t>(i)].is_number()) throw ConfigError("x0[" + std::to_string(i) + "]", "expected a number");
      sc.x0bar[0](i) = x[static_cast<std::size_t>(i)].get<double>();
    }
  }
  if (j.contains("x0bar")) {
    const Matrix x = matrix_from_json(j["x0bar"], "x0bar");
    if (x.rows() != h || x.cols() != n) {
      throw ConfigError("x0bar", "expected " + std::to_string(h) + " rows of " + std::to_string(n) + " entries");
    }
    for (Index t = 0; t < h; ++t) sc.x0bar[t] = x.row(t).transpose();
  }
  sc.validate(problem.plant, problem.model(), &problem.automaton);
  return sc;
}

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ProblemConfig c = load_config(config_path);
    for (const auto& w : c.warnings) err << "warning: " << w << "\n";
    out << "ok: " << c.plant.state_dim() << " states, " << c.plant.disturbance_dim() << " disturbances, "
        << c.plant.channel_count() << " channels (" << c.plant.output_dim() << " outputs), " << c.patterns.size()
        << " modes, " << enumerate_histories(c.automaton, c.synthesis.extended_length()).size()
        << " constraint histories\n";
    return int{exit_ok};
  });
}

int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ProblemConfig c = load_config(o.config);
    for (const auto& w : c.warnings) err << "warning: " << w << "\n";
    if (o.mode) {
      if (*o.mode == "exact") {
        c.synthesis.mode = ResidualMode::exact;
      } else if (*o.mode == "relaxed") {
        c.synthesis.mode = ResidualMode::relaxed;
      } else {
        throw std::invalid_argument("--mode must be exact or relaxed");
      }
    }
    if (o.eps) c.synthesis.eps_bar = *o.eps;
    if (o.fir) c.synthesis.fir_length = *o.fir;
    if (o.memory) c.synthesis.memory = *o.memory;
    c.synthesis.validate();
    const SwitchedOutputModel model = c.model();

    if (!o.dump_lp.empty()) {
      DecisionLayout layout(enumerate_histories(c.automaton, c.synthesis.memory), c.synthesis.fir_length,
                            c.plant.state_dim(), model.output_dim());
      const auto lp = assemble_lp(build_residual_rows(c.plant, model, c.automaton, c.synthesis, layout),
                                  build_performance_rows(c.plant, model, c.automaton, c.synthesis, layout),
                                  c.synthesis, layout);
      std::ofstream f(o.dump_lp);
      if (!f) throw std::invalid_argument("cannot write " + o.dump_lp);
      write_lp_format(f, lp.lp, "switchguard synthesis LP");
    }

    ResultBundle b;
    b.tool_version = tool_version();
    b.config = to_json(c);
    b.result = synthesize(c.plant, model, c.automaton, c.synthesis);
    out << "status: " << to_string(b.result.status) << "\n";
    if (b.result.ok()) {
      if (c.synthesis.verify_samples > 0) {
        b.certification = certify(b.result, c.plant, model, c.automaton, c.synthesis.verify_horizon,
                                  c.synthesis.verify_samples, c.seed);
      }
      out << "gamma_bar: " << format_number(b.result.gamma_bar) << "\n"
          << "eps_achieved: " << format_number(b.result.eps_achieved) << "\n"
          << "certified_bound: " << format_number(b.result.certified_bound) << "\n"
          << "lp: " << b.result.lp_variables << " variables, " << b.result.lp_constraints << " constraints, "
          << b.result.lp_iterations << " iterations\n";
      if (b.certification) {
        out << "certification: " << b.certification->samples.size() << " sequences at horizon "
            << b.certification->horizon << ", max residual " << format_number(b.certification->max_residual)
            << ", max performance " << format_number(b.certification->max_performance) << ", max parametrization residual "
            << format_number(b.certification->max_parametrization_residual) << "\n";
      }
    } else {
      err << b.result.diagnostic << "\n";
    }
    if (!o.out.empty()) write_file(o.out, bundle_to_json(b).dump(2) + "\n");
    return status_exit(b.result.status);
  });
}

int cmd_norm(const NormOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LoadedBundle lb = load_for_evaluation(o.bundle);
    const SynthesisResult& r = lb.bundle.result;
    const ProblemConfig& c = lb.problem;
    std::vector<ModeSequence> sigmas;
    if (o.sigma) {
      ModeSequence s = parse_sigma(*o.sigma, c.patterns.size());
      if (!c.automaton.admissible(s)) throw std::invalid_argument("sigma is not admissible under the automaton");
      sigmas.push_back(std::move(s));
    } else {
      const std::size_t k = o.samples.value_or(c.synthesis.verify_samples);
      const Index h = o.horizon.value_or(c.synthesis.verify_horizon);
      std::mt19937_64 rng(c.seed);
      for (std::size_t i = 0; i < k; ++i) sigmas.push_back(sample_sequence(c.automaton, static_cast<std::size_t>(h), rng));
    }
    const RowMaxima rm = evaluate_factors(r.Q, r.Z, c.plant, lb.model, c.automaton, r.Q.fir_length());
    std::vector<std::pair<double, double>> rows(sigmas.size());
    const Mode pad = c.automaton.padding_mode();
    parallel_for(sigmas.size(), [&](std::size_t i) {
      rows[i] = {induced_norm(residual_operator(r.Q, r.Z, c.plant, lb.model, sigmas[i], pad)),
                 induced_norm(performance_operator(r.Q, r.Z, c.plant, lb.model, sigmas[i], pad))};
    });
    std::ostringstream csv;
    csv << "sigma,eps,gamma\n";
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      csv << join(sigmas[i], ' ') << "," << format_number(rows[i].first) << "," << format_number(rows[i].second) << "\n";
    }
    out << "# bundle gamma_bar " << format_number(r.gamma_bar) << ", eps_achieved " << format_number(r.eps_achieved)
        << ", certified_bound " << format_number(r.certified_bound) << "\n";
    out << "# recomputed gamma_bar " << format_number(rm.performance) << ", eps_achieved "
        << format_number(rm.residual) << ", certified_bound "
        << format_number(certified_bound(rm.performance, r.mode, r.eps_bar)) << "\n";
    if (o.csv.empty()) {
      out << csv.str();
    } else {
      write_file(o.csv, csv.str());
    }
    return int{exit_ok};
  });
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.worst == !o.scenario.empty()) throw std::invalid_argument("give exactly one of --scenario or --worst");
    const LoadedBundle lb = load_for_evaluation(o.bundle, o.config);
    const ProblemConfig& c = lb.problem;
    const Mode pad = c.automaton.padding_mode();
    Scenario sc;
    if (o.worst) {
      ModeSequence sigma = o.sigma ? parse_sigma(*o.sigma, c.patterns.size()) : ModeSequence(static_cast<std::size_t>(o.horizon), 0);
      if (!c.automaton.admissible(sigma)) throw std::invalid_argument("sigma is not admissible under the automaton");
      WorstCaseOptions wo{parse_initial(o.initial), pad};
      const WorstCase wc = worst_case_inputs(c.plant, lb.model, lb.estimator, sigma, wo);
      out << "worst_case_value: " << format_number(wc.value) << " at t=" << wc.time << " row=" << wc.row + 1 << "\n";
      sc = wc.scenario;
    } else {
      sc = parse_scenario(read_json_file(o.scenario), c);
    }
    const Trace tr = simulate(c.plant, lb.model, lb.estimator, sc, pad);
    out << "sup_error: " << format_number(tr.sup_error) << "\n";
    if (!o.trace.empty()) {
      std::ostringstream csv;
      write_trace_csv(csv, sc, tr);
      write_file(o.trace, csv.str());
    }
    return int{exit_ok};
  });
}

int cmd_attack(const AttackOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    AttackStrategy strategy;
    if (o.strategy == "exhaustive") {
      strategy = AttackStrategy::exhaustive;
    } else if (o.strategy == "greedy") {
      strategy = AttackStrategy::greedy;
    } else {
      throw std::invalid_argument("--strategy must be exhaustive or greedy");
    }
    const LoadedBundle lb = load_for_evaluation(o.bundle, o.config);
    const ProblemConfig& c = lb.problem;
    WorstCaseOptions wo{parse_initial(o.initial), c.automaton.padding_mode()};
    const AttackResult a = attack_search(c.plant, lb.model, c.automaton, lb.estimator, o.horizon, strategy, wo);
    out << "strategy: " << to_string(strategy) << "\n"
        << "horizon: " << o.horizon << "\n"
        << "sigma: " << join(a.sigma, ',') << "\n"
        << "value: " << format_number(a.value) << "\n"
        << "certified_bound: " << format_number(lb.bundle.result.certified_bound) << "\n"
        << "sequences_evaluated: " << a.evaluated << "\n";
    return int{exit_ok};
  });
}

int cmd_example(const ExampleOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    struct Run {
      std::string label;
      ProblemConfig problem;
      SynthesisResult result;
    };
    std::vector<Run> runs;
    auto run = [&](std::string label, std::size_t modes, std::size_t n, ResidualMode mode, double eps) {
      ProblemConfig p = example_problem(modes, n);
      p.synthesis.mode = mode;
      p.synthesis.eps_bar = eps;
      SynthesisResult r = synthesize(p.plant, p.model(), p.automaton, p.synthesis);
      runs.push_back({std::move(label), std::move(p), std::move(r)});
      return runs.back().result;
    };
    const SynthesisResult nominal = run("nominal", 1, 2, ResidualMode::exact, 0.0);
    const SynthesisResult switching = run("switching", 2, 5, ResidualMode::exact, 0.0);
    run("switching relaxed eps_bar=0.1", 2, 5, ResidualMode::relaxed, 0.1);
    run("switching relaxed eps_bar=0.5", 2, 5, ResidualMode::relaxed, 0.5);

    const double nominal_target = fixtures::published_nominal_gamma;
    const double switching_target = fixtures::published_switching_gamma;
    const bool nominal_met = nominal.ok() && std::abs(nominal.gamma_bar - nominal_target) <= 0.01 * nominal_target;
    const bool switching_met = switching.ok() && switching.gamma_bar <= 1.01 * switching_target;

    struct Diff {
      std::string table;
      double max_abs;
    };
    std::vector<Diff> diffs;
    if (nominal.ok()) diffs.push_back({"T(0..1)", max_tap_diff(nominal.T, ModeHistory{{0}}, fixtures::published_nominal_taps())});
    if (switching.ok()) {
      diffs.push_back({"T1(0..4) vs mode 0", max_tap_diff(switching.T, ModeHistory{{0}}, fixtures::published_switching_taps(1))});
      diffs.push_back({"T2(0..4) vs mode 1", max_tap_diff(switching.T, ModeHistory{{1}}, fixtures::published_switching_taps(2))});
    }

    if (o.json) {
      Json j;
      j["tool_version"] = tool_version();
      j["published"] = {{"nominal_gamma", nominal_target}, {"switching_gamma", switching_target}};
      j["runs"] = Json::array();
      for (const auto& r : runs) {
        ResultBundle b{tool_version(), r.result, std::nullopt, to_json(r.problem)};
        j["runs"].push_back({{"label", r.label}, {"bundle", bundle_to_json(b)}});
      }
      j["coefficient_diff"] = Json::array();
      for (const auto& d : diffs) j["coefficient_diff"].push_back({{"table", d.table}, {"max_abs_diff", d.max_abs}});
      j["targets_met"] = {{"nominal", nominal_met}, {"switching", switching_met}};
      out << j.dump(2) << "\n";
    } else {
      auto value = [](const SynthesisResult& r) {
        if (!r.ok()) return std::string(to_string(r.status));
        std::ostringstream os;
        os << std::setprecision(6) << r.gamma_bar;
        return os.str();
      };
      out << "nominal: " << format_number(nominal_target) << " vs ours: " << value(nominal) << "\n";
      out << "switching: " << format_number(switching_target) << " vs ours: " << value(switching) << "\n";
      out << "\n";
      for (const auto& r : runs) {
        out << r.label << " (M=" << r.problem.synthesis.memory << ", N=" << r.problem.synthesis.fir_length
            << "): " << to_string(r.result.status);
        if (r.result.ok()) {
          out << ", gamma_bar " << format_number(r.result.gamma_bar) << ", eps_achieved "
              << format_number(r.result.eps_achieved) << ", certified_bound " << format_number(r.result.certified_bound);
        }
        out << "\n";
      }
      out << "\ncoefficient diff against the printed tables (informational, optima are not unique):\n";
      for (const auto& d : diffs) out << "  " << d.table << ": max |ours - printed| = " << format_number(d.max_abs) << "\n";
    }
    return (nominal_met && switching_met) ? int{exit_ok} : int{exit_numerical};
  });
}

}  // namespace switchguard::cli
