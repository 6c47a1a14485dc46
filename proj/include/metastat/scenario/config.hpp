#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "metastat/characteristics.hpp"
#include "metastat/growth_model.hpp"
#include "metastat/transport.hpp"
#include "metastat/treatment.hpp"

namespace metastat::scenario {

/// Malformed or invalid configuration document. `line` is 1-based, 0 when
/// the problem is not tied to a location.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, std::string key = {}, std::size_t line = 0);

  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

struct ScenarioWindow {
  double start = 0.0;
  double treatment_start = 0.0;  // t0
  double treatment_end = 0.0;    // T1
  double horizon = 0.0;          // T

  bool operator==(const ScenarioWindow&) const = default;
};

struct SolverSettings {
  double base_step = 0.25;
  /// RK4 substep bound; defaults to base_step.
  std::optional<double> flow_step;
  double event_tolerance = 1e-10;
  std::optional<double> smoothing;
  BoundaryQuadrature quadrature = BoundaryQuadrature::Paper;
  DiagonalRule diagonal = DiagonalRule::Zero;
  PrimaryMode primary_mode = PrimaryMode::Continuous;
  /// Oracle grid refinement.
  std::size_t refinement = 4;
  std::size_t max_steps = 200000;

  bool operator==(const SolverSettings&) const = default;
};

struct OutputSettings {
  std::vector<double> snapshot_times;
  /// First entry feeds mi_total, second mi_detectable, the rest extra columns.
  std::vector<double> b_min{1.0, 1e8};

  bool operator==(const OutputSettings&) const = default;
};

/// Piecewise-linear initial density samples.
struct InitialSamples {
  std::vector<double> x;
  std::vector<double> u;

  bool operator==(const InitialSamples&) const = default;
};

struct ScenarioConfig {
  std::string name;
  GompertzParams growth;
  ColonizationLaw seeding;
  std::optional<ChemoProtocol> chemo;
  std::optional<RadioProtocol> radio;
  ScenarioWindow window;
  SolverSettings solver;
  OutputSettings outputs;
  std::optional<InitialSamples> initial;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
  SimulationConfig simulation() const;
  InitialDensity initial_density() const;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Parses a YAML document, fills defaults and validates. Unknown keys are
/// rejected. `fallback_name` is used when the document has no `name`.
ScenarioConfig parse_config(std::string_view text, std::string_view fallback_name = "scenario");

/// Reads and parses a file; the name defaults to the file stem.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Normalized YAML with every field explicit; parse_config(emit_config(c)) == c.
std::string emit_config(const ScenarioConfig& cfg);

const char* to_string(BoundaryQuadrature q);
const char* to_string(DiagonalRule d);
const char* to_string(PrimaryMode m);

}  // namespace metastat::scenario
