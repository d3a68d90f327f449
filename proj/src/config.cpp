#include "switchguard/config.hpp"

#include <fstream>
#include <sstream>

namespace switchguard {

namespace {

const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key, "missing field");
  return *it;
}

const Json* optional_field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::int64_t integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t positive(const Json& j, const std::string& path) {
  const auto v = integer(j, path);
  if (v < 1) throw ConfigError(path, "must be >= 1");
  return static_cast<std::size_t>(v);
}

std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

std::vector<Mode> modes_from_json(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of mode ids");
  std::vector<Mode> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(static_cast<Mode>(integer(j[i], index_path(path, i))));
  return out;
}

ChannelPlant parse_plant(const Json& j) {
  const std::string path = "plant";
  Matrix a = matrix_from_json(field(j, "A", path), path + ".A");
  if (a.rows() != a.cols()) throw ConfigError(path + ".A", "must be square");
  const Index n = a.rows();
  Matrix b = matrix_from_json(field(j, "B", path), path + ".B");
  if (b.rows() != n) {
    throw ConfigError(path + ".B", "expected " + std::to_string(n) + " rows, got " + std::to_string(b.rows()));
  }
  const Json& ch = field(j, "channels", path);
  if (!ch.is_array() || ch.empty()) throw ConfigError(path + ".channels", "expected a non-empty array");
  std::vector<Channel> channels;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    const std::string cp = index_path(path + ".channels", i);
    Matrix c = matrix_from_json(field(ch[i], "C", cp), cp + ".C");
    Matrix d = matrix_from_json(field(ch[i], "D", cp), cp + ".D");
    if (c.cols() != n) {
      throw ConfigError(cp + ".C", "expected " + std::to_string(n) + " columns, got " + std::to_string(c.cols()));
    }
    if (d.cols() != b.cols()) {
      throw ConfigError(cp + ".D", "expected " + std::to_string(b.cols()) + " columns, got " + std::to_string(d.cols()));
    }
    if (d.rows() != c.rows()) {
      throw ConfigError(cp + ".D", "expected " + std::to_string(c.rows()) + " rows (as C), got " +
                                       std::to_string(d.rows()));
    }
    channels.push_back({std::move(c), std::move(d)});
  }
  double x0_bound = 1.0;
  if (const Json* x = optional_field(j, "x0_bound", path)) {
    x0_bound = number(*x, path + ".x0_bound");
    if (x0_bound < 0) throw ConfigError(path + ".x0_bound", "must be nonnegative");
  }
  return ChannelPlant(std::move(a), std::move(b), std::move(channels), x0_bound);
}

std::vector<SelectionMask> parse_patterns(const Json& j, std::size_t channel_count) {
  const std::string path = "attack.patterns";
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of channel id lists");
  std::vector<SelectionMask> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string pp = index_path(path, i);
    if (!j[i].is_array()) throw ConfigError(pp, "expected an array of 1-based channel ids");
    SelectionMask m;
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      const auto id = integer(j[i][k], index_path(pp, k));
      if (id < 1 || static_cast<std::size_t>(id) > channel_count) {
        throw ConfigError(index_path(pp, k), "channel id " + std::to_string(id) + " outside 1.." +
                                                 std::to_string(channel_count));
      }
      if (!m.delivered.insert(static_cast<std::size_t>(id - 1)).second) {
        throw ConfigError(index_path(pp, k), "channel id " + std::to_string(id) + " listed twice");
      }
    }
    out.push_back(std::move(m));
  }
  if (out.front().delivered.size() != channel_count) {
    throw ConfigError(path + "[0]", "pattern 0 is the nominal mode and must deliver every channel");
  }
  return out;
}

SwitchingAutomaton parse_automaton(const Json* j, std::size_t modes) {
  const std::string path = "attack";
  Mode pad = 0;
  if (j == nullptr) return SwitchingAutomaton::complete(modes);
  if (const Json* p = optional_field(*j, "padding_mode", path)) {
    const auto v = integer(*p, path + ".padding_mode");
    if (v < 0 || static_cast<std::size_t>(v) >= modes) throw ConfigError(path + ".padding_mode", "not a mode id");
    pad = static_cast<Mode>(v);
  }
  std::vector<std::vector<bool>> allowed(modes, std::vector<bool>(modes, true));
  if (const Json* a = optional_field(*j, "automaton", path)) {
    const std::string ap = path + ".automaton";
    if (a->is_string()) {
      if (a->get<std::string>() != "complete") throw ConfigError(ap, "expected \"complete\" or a 0/1 matrix");
    } else {
      if (!a->is_array() || a->size() != modes) {
        throw ConfigError(ap, "expected a " + std::to_string(modes) + "x" + std::to_string(modes) + " 0/1 matrix");
      }
      for (std::size_t r = 0; r < modes; ++r) {
        const Json& row = (*a)[r];
        if (!row.is_array() || row.size() != modes) throw ConfigError(index_path(ap, r), "row length mismatch");
        for (std::size_t c = 0; c < modes; ++c) {
          const Json& v = row[c];
          const std::string vp = index_path(index_path(ap, r), c);
          if (v.is_boolean()) {
            allowed[r][c] = v.get<bool>();
          } else {
            const auto x = integer(v, vp);
            if (x != 0 && x != 1) throw ConfigError(vp, "expected 0 or 1");
            allowed[r][c] = x == 1;
          }
        }
      }
    }
  }
  std::vector<bool> initial(modes, true);
  if (const Json* in = optional_field(*j, "initial", path)) {
    initial.assign(modes, false);
    const auto ids = modes_from_json(*in, path + ".initial");
    if (ids.empty()) throw ConfigError(path + ".initial", "no initial mode");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= modes) {
        throw ConfigError(index_path(path + ".initial", i), "not a mode id");
      }
      initial[static_cast<std::size_t>(ids[i])] = true;
    }
  }
  return SwitchingAutomaton(std::move(allowed), std::move(initial), pad);
}

SynthesisConfig parse_synthesis(const Json* j) {
  SynthesisConfig c;
  if (j == nullptr) return c;
  const std::string path = "synthesis";
  if (const Json* v = optional_field(*j, "M", path)) c.memory = positive(*v, path + ".M");
  if (const Json* v = optional_field(*j, "N", path)) c.fir_length = positive(*v, path + ".N");
  if (const Json* v = optional_field(*j, "mode", path)) {
    const std::string s = v->is_string() ? v->get<std::string>() : "";
    if (s == "exact") {
      c.mode = ResidualMode::exact;
    } else if (s == "relaxed") {
      c.mode = ResidualMode::relaxed;
    } else {
      throw ConfigError(path + ".mode", "expected \"exact\" or \"relaxed\"");
    }
  }
  if (const Json* v = optional_field(*j, "eps_bar", path)) {
    c.eps_bar = number(*v, path + ".eps_bar");
    if (c.eps_bar < 0 || c.eps_bar >= 1) throw ConfigError(path + ".eps_bar", "must satisfy 0 <= eps_bar < 1");
  }
  if (const Json* v = optional_field(*j, "verify_horizon", path)) {
    c.verify_horizon = static_cast<Index>(positive(*v, path + ".verify_horizon"));
  }
  if (const Json* v = optional_field(*j, "verify_samples", path)) {
    const auto s = integer(*v, path + ".verify_samples");
    if (s < 0) throw ConfigError(path + ".verify_samples", "must be nonnegative");
    c.verify_samples = static_cast<std::size_t>(s);
  }
  return c;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  std::size_t cols = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].empty()) throw ConfigError(index_path(path, i), "expected a non-empty row");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols) {
      throw ConfigError(index_path(path, i), "row has " + std::to_string(j[i].size()) + " entries, expected " +
                                                 std::to_string(cols));
    }
  }
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Index>(i), static_cast<Index>(k)) = number(j[i][k], index_path(index_path(path, i), k));
    }
  }
  return m;
}

ProblemConfig parse_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("$", "config must be a JSON object");
  ChannelPlant plant = parse_plant(field(j, "plant", "$"));
  const Json* attack = optional_field(j, "attack", "$");
  std::vector<SelectionMask> patterns;
  if (attack != nullptr && attack->contains("patterns")) {
    patterns = parse_patterns((*attack)["patterns"], plant.channel_count());
  } else {
    patterns = {SelectionMask::all(plant.channel_count())};
  }
  SwitchingAutomaton automaton = parse_automaton(attack, patterns.size());
  SynthesisConfig synthesis = parse_synthesis(optional_field(j, "synthesis", "$"));
  std::uint64_t seed = 1;
  if (const Json* s = optional_field(j, "seed", "$")) {
    const auto v = integer(*s, "seed");
    if (v < 0) throw ConfigError("seed", "must be nonnegative");
    seed = static_cast<std::uint64_t>(v);
  }
  synthesis.seed = seed;
  ProblemConfig c{std::move(plant), std::move(patterns), std::move(automaton), synthesis, seed, {}};
  build_modes(c.plant, c.patterns, &c.warnings);
  return c;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path, std::string("not valid JSON: ") + e.what());
  }
}

ProblemConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

Json to_json(const ProblemConfig& c) {
  Json plant;
  plant["A"] = matrix_to_json(c.plant.A());
  plant["B"] = matrix_to_json(c.plant.B());
  plant["channels"] = Json::array();
  for (const auto& ch : c.plant.channels()) plant["channels"].push_back({{"C", matrix_to_json(ch.C)}, {"D", matrix_to_json(ch.D)}});
  plant["x0_bound"] = c.plant.x0_bound();
  Json attack;
  attack["patterns"] = Json::array();
  for (const auto& m : c.patterns) {
    Json ids = Json::array();
    for (auto id : m.delivered) ids.push_back(id + 1);
    attack["patterns"].push_back(std::move(ids));
  }
  if (c.automaton.is_complete()) {
    attack["automaton"] = "complete";
  } else {
    Json rows = Json::array();
    for (const auto& r : c.automaton.transitions()) {
      Json row = Json::array();
      for (bool b : r) row.push_back(b ? 1 : 0);
      rows.push_back(std::move(row));
    }
    attack["automaton"] = std::move(rows);
  }
  Json initial = Json::array();
  for (std::size_t m = 0; m < c.automaton.mode_count(); ++m) {
    if (c.automaton.can_start(static_cast<Mode>(m))) initial.push_back(m);
  }
  attack["initial"] = std::move(initial);
  attack["padding_mode"] = c.automaton.padding_mode();
  Json synth{{"M", c.synthesis.memory},
             {"N", c.synthesis.fir_length},
             {"mode", to_string(c.synthesis.mode)},
             {"eps_bar", c.synthesis.eps_bar},
             {"verify_horizon", c.synthesis.verify_horizon},
             {"verify_samples", c.synthesis.verify_samples}};
  return Json{{"plant", std::move(plant)}, {"attack", std::move(attack)}, {"synthesis", std::move(synth)}, {"seed", c.seed}};
}

Json fir_to_json(const SwitchingFIR& f) {
  Json taps = Json::array();
  for (const auto& h : f.histories()) {
    for (std::size_t k = 0; k < f.fir_length(); ++k) {
      taps.push_back({{"history", h.modes}, {"lag", k}, {"matrix", matrix_to_json(f.tap(h, k))}});
    }
  }
  return Json{{"memory", f.memory()},
              {"fir_length", f.fir_length()},
              {"out_dim", f.out_dim()},
              {"in_dim", f.in_dim()},
              {"output_only", f.output_only()},
              {"taps", std::move(taps)}};
}

SwitchingFIR fir_from_json(const Json& j, const std::string& path) {
  SwitchingFIR f(positive(field(j, "memory", path), path + ".memory"), positive(field(j, "fir_length", path), path + ".fir_length"),
                 static_cast<Index>(positive(field(j, "out_dim", path), path + ".out_dim")),
                 static_cast<Index>(positive(field(j, "in_dim", path), path + ".in_dim")),
                 j.value("output_only", false));
  const Json& taps = field(j, "taps", path);
  if (!taps.is_array()) throw ConfigError(path + ".taps", "expected an array");
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const std::string tp = index_path(path + ".taps", i);
    ModeHistory h{modes_from_json(field(taps[i], "history", tp), tp + ".history")};
    const auto lag = integer(field(taps[i], "lag", tp), tp + ".lag");
    Matrix m = matrix_from_json(field(taps[i], "matrix", tp), tp + ".matrix");
    try {
      f.set(h, static_cast<std::size_t>(lag), std::move(m));
    } catch (const std::exception& e) {
      throw ConfigError(tp, e.what());
    }
  }
  return f;
}

Json report_to_json(const CertificationReport& r) {
  Json samples = Json::array();
  for (const auto& s : r.samples) {
    samples.push_back({{"sigma", s.sigma},
                       {"residual_norm", s.residual_norm},
                       {"performance_norm", s.performance_norm},
                       {"parametrization_residual_norm", s.parametrization_residual_norm}});
  }
  return Json{{"horizon", r.horizon},
              {"max_residual", r.max_residual},
              {"max_performance", r.max_performance},
              {"max_parametrization_residual", r.max_parametrization_residual},
              {"samples", std::move(samples)}};
}

CertificationReport report_from_json(const Json& j, const std::string& path) {
  CertificationReport r;
  r.horizon = static_cast<Index>(integer(field(j, "horizon", path), path + ".horizon"));
  r.max_residual = number(field(j, "max_residual", path), path + ".max_residual");
  r.max_performance = number(field(j, "max_performance", path), path + ".max_performance");
  r.max_parametrization_residual = number(field(j, "max_parametrization_residual", path), path + ".max_parametrization_residual");
  const Json& samples = field(j, "samples", path);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string sp = index_path(path + ".samples", i);
    r.samples.push_back({modes_from_json(field(samples[i], "sigma", sp), sp + ".sigma"),
                         number(field(samples[i], "residual_norm", sp), sp + ".residual_norm"),
                         number(field(samples[i], "performance_norm", sp), sp + ".performance_norm"),
                         number(field(samples[i], "parametrization_residual_norm", sp), sp + ".parametrization_residual_norm")});
  }
  return r;
}

Json bundle_to_json(const ResultBundle& b) {
  const SynthesisResult& r = b.result;
  Json j{{"tool", "switchguard"},
         {"tool_version", b.tool_version},
         {"status", to_string(r.status)},
         {"diagnostic", r.diagnostic},
         {"mode", to_string(r.mode)},
         {"eps_bar", r.eps_bar},
         {"gamma_bar", r.gamma_bar},
         {"lp_objective", r.lp_objective},
         {"eps_achieved", r.eps_achieved},
         {"certified_bound", r.certified_bound},
         {"lp", {{"variables", r.lp_variables}, {"constraints", r.lp_constraints}, {"iterations", r.lp_iterations}}},
         {"config", b.config}};
  if (r.ok()) {
    j["Q"] = fir_to_json(r.Q);
    j["Z"] = fir_to_json(r.Z);
    j["T"] = fir_to_json(r.T);
  }
  if (b.certification) j["certification"] = report_to_json(*b.certification);
  return j;
}

ResultBundle bundle_from_json(const Json& j) {
  const std::string path = "$";
  ResultBundle b;
  b.tool_version = j.value("tool_version", "");
  SynthesisResult& r = b.result;
  const std::string status = field(j, "status", path).get<std::string>();
  if (status == "optimal") {
    r.status = SynthesisStatus::optimal;
  } else if (status == "infeasible") {
    r.status = SynthesisStatus::infeasible;
  } else if (status == "unbounded") {
    r.status = SynthesisStatus::unbounded;
  } else if (status == "numerical_failure") {
    r.status = SynthesisStatus::numerical_failure;
  } else {
    throw ConfigError("status", "unknown status \"" + status + "\"");
  }
  r.diagnostic = j.value("diagnostic", "");
  const std::string mode = field(j, "mode", path).get<std::string>();
  if (mode != "exact" && mode != "relaxed") throw ConfigError("mode", "expected exact or relaxed");
  r.mode = mode == "exact" ? ResidualMode::exact : ResidualMode::relaxed;
  r.eps_bar = number(field(j, "eps_bar", path), "eps_bar");
  r.gamma_bar = number(field(j, "gamma_bar", path), "gamma_bar");
  r.lp_objective = number(field(j, "lp_objective", path), "lp_objective");
  r.eps_achieved = number(field(j, "eps_achieved", path), "eps_achieved");
  r.certified_bound = number(field(j, "certified_bound", path), "certified_bound");
  if (const Json* lp = optional_field(j, "lp", path)) {
    r.lp_variables = lp->value("variables", Index{0});
    r.lp_constraints = lp->value("constraints", Index{0});
    r.lp_iterations = lp->value("iterations", Index{0});
  }
  if (r.ok()) {
    r.Q = fir_from_json(field(j, "Q", path), "Q");
    r.Z = fir_from_json(field(j, "Z", path), "Z");
    r.T = fir_from_json(field(j, "T", path), "T");
  }
  if (const Json* c = optional_field(j, "certification", path)) b.certification = report_from_json(*c, "certification");
  b.config = field(j, "config", path);
  return b;
}

ResultBundle load_bundle(const std::string& path) { return bundle_from_json(read_json_file(path)); }

}  // namespace switchguard
