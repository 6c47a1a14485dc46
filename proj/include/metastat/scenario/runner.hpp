#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metastat/metrics.hpp"
#include "metastat/scenario/config.hpp"

namespace metastat::scenario {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitStrict = 3,
  kExitSolver = 4,
};

struct RunOptions {
  std::filesystem::path out_dir = "out";
  bool strict = false;
  bool validate_only = false;
  std::size_t parallel = 1;
  std::optional<OracleKind> oracle;
};

struct ScenarioOutcome {
  std::string name;
  int status = kExitOk;
  std::vector<std::string> messages;
  std::optional<SimulationResult> result;
};

struct RunSummary {
  int exit_code = kExitOk;
  std::vector<ScenarioOutcome> outcomes;
};

/// Field for a scenario, with the PK cache on the scheme grid.
GrowthField build_field(const ScenarioConfig& cfg);

/// Invariant violations worth a nonzero exit under --strict.
std::vector<std::string> strict_violations(const SimulationResult& r);

std::string mi_csv(const SimulationResult& r);
std::string snapshots_csv(const SimulationResult& r);
std::string error_csv(const SimulationResult& r, const ReferenceSolution& ref);

/// Runs every scenario (up to `parallel` at once) and writes, per scenario,
/// <out>/<name>/{config.yaml, mi.csv, snapshots.csv, report.json} plus
/// error.csv with an oracle. Scenarios sharing a window also get
/// <out>/comparison[-k].csv and <out>/ratios[-k].csv.
RunSummary run_scenarios(const std::vector<ScenarioConfig>& configs, const RunOptions& opts);

}  // namespace metastat::scenario
