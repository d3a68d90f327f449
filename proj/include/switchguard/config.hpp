#pragma once

// JSON problem configs and result bundles. Matrices are row-major nested
// arrays. Channel ids in attack patterns are 1-based in files.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "switchguard/synthesis.hpp"

namespace switchguard {

using Json = nlohmann::json;

/// Schema or dimension error; `path` locates the offending field, e.g.
/// "plant.channels[1].C".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ProblemConfig {
  ChannelPlant plant;
  std::vector<SelectionMask> patterns;
  SwitchingAutomaton automaton;
  SynthesisConfig synthesis;
  std::uint64_t seed = 1;
  /// Non-fatal findings, such as duplicate masks.
  std::vector<std::string> warnings;

  SwitchedOutputModel model() const { return build_modes(plant, patterns); }
};

ProblemConfig parse_config(const Json& j);
/// Throws ConfigError with path "<file>" when the file is missing or not JSON.
ProblemConfig load_config(const std::string& path);
Json to_json(const ProblemConfig& c);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& path);

Json fir_to_json(const SwitchingFIR& f);
SwitchingFIR fir_from_json(const Json& j, const std::string& path);

Json report_to_json(const CertificationReport& r);
CertificationReport report_from_json(const Json& j, const std::string& path);

struct ResultBundle {
  std::string tool_version;
  SynthesisResult result;
  std::optional<CertificationReport> certification;
  /// Config that produced the result, in canonical form.
  Json config;
};

Json bundle_to_json(const ResultBundle& b);
ResultBundle bundle_from_json(const Json& j);
ResultBundle load_bundle(const std::string& path);

Json read_json_file(const std::string& path);

}  // namespace switchguard
