// Scenario runner: metastat run <config>... [--out dir] [--strict] ...
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "metastat/scenario/runner.hpp"

namespace ms = metastat::scenario;

int main(int argc, char** argv) {
  CLI::App app{"Metastatic growth solver: runs scenario configs and writes CSV/JSON outputs"};
  app.require_subcommand(1);

  std::vector<std::string> files;
  std::string out_dir;
  bool strict = false;
  bool validate_only = false;
  std::size_t parallel = 1;
  std::string oracle = "none";

  auto* run = app.add_subcommand("run", "Run one or more scenario configs");
  run->add_option("configs", files, "Scenario config files (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (default: $METASTAT_OUT or ./out)");
  run->add_flag("--strict", strict, "Exit 3 on hypothesis or invariant violations");
  run->add_flag("--validate-only", validate_only, "Check configs and hypotheses without solving");
  run->add_option("--parallel", parallel, "Scenarios run concurrently")->check(CLI::PositiveNumber);
  run->add_option("--oracle", oracle, "Attach a reference solution and write error.csv")
      ->check(CLI::IsMember({"none", "no-treatment", "chemo-only"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ms::kExitConfig;
  }

  ms::RunOptions opts;
  if (!out_dir.empty()) {
    opts.out_dir = out_dir;
  } else if (const char* env = std::getenv("METASTAT_OUT"); env && *env) {
    opts.out_dir = env;
  }
  opts.strict = strict;
  opts.validate_only = validate_only;
  opts.parallel = parallel;
  if (oracle == "no-treatment") opts.oracle = metastat::OracleKind::NoTreatment;
  if (oracle == "chemo-only") opts.oracle = metastat::OracleKind::ChemoOnly;

  std::vector<ms::ScenarioConfig> configs;
  for (const auto& f : files) {
    try {
      configs.push_back(ms::load_config(f));
    } catch (const ms::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return ms::kExitConfig;
    }
  }

  ms::RunSummary summary;
  try {
    summary = ms::run_scenarios(configs, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ms::kExitSolver;
  }
  for (const auto& oc : summary.outcomes) {
    std::cout << oc.name << ": " << (oc.status == 0 ? "ok" : "failed (" + std::to_string(oc.status) + ")")
              << '\n';
    for (const auto& m : oc.messages) std::cout << "  " << m << '\n';
  }
  return summary.exit_code;
}
