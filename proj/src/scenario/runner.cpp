#include "metastat/scenario/runner.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <thread>

#include "metastat/errors.hpp"

namespace metastat::scenario {

namespace {

using json = nlohmann::ordered_json;

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

json optional_num(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json hypotheses_json(const HypothesisReport& rep) {
  json arr = json::array();
  for (const auto& c : rep.checks) {
    arr.push_back({{"name", c.name},
                   {"status", to_string(c.status)},
                   {"t", optional_num(c.t)},
                   {"x", optional_num(c.x)},
                   {"value", optional_num(c.value)}});
  }
  return arr;
}

json compatibility_json(const CompatibilityReport& c) {
  return {{"compatible", c.compatible()}, {"boundary_ok", c.boundary_ok},
          {"u0_at_b", c.u0_at_b},         {"flux_ok", c.flux_ok},
          {"flux_lhs", c.flux_lhs},       {"flux_rhs", c.flux_rhs},
          {"tolerance", c.tolerance}};
}

}  // namespace

GrowthField build_field(const ScenarioConfig& cfg) {
  const auto disc = discontinuity_times(cfg.chemo ? &*cfg.chemo : nullptr,
                                        cfg.radio ? &*cfg.radio : nullptr);
  const TimeWindow window{cfg.window.start, cfg.window.horizon};
  std::vector<double> cache;
  if (cfg.chemo) cache = build_time_grid(window, cfg.solver.base_step, disc).nodes;
  return GrowthField(cfg.growth, cfg.chemo, cfg.radio, window, cfg.solver.smoothing, cache);
}

std::vector<std::string> strict_violations(const SimulationResult& r) {
  std::vector<std::string> out;
  for (const auto& c : r.hypotheses.checks)
    if (c.status == CheckStatus::Fail) out.push_back("hypothesis failed: " + c.name);
  const auto& inv = r.invariants;
  if (inv.min_u < 0.0) out.push_back("negative density " + format_double(inv.min_u));
  if (inv.max_abs_diagonal != 0.0) out.push_back("nonzero density on the zeroed diagonal");
  if (!inv.monotone) out.push_back("abscissae not monotone");
  if (!r.apriori.holds)
    out.push_back("a priori bound violated at t = " + format_double(*r.apriori.first_violation_t));
  return out;
}

std::string mi_csv(const SimulationResult& r) {
  std::string out = "t,mi_total,mi_detectable";
  for (std::size_t k = 2; k < r.b_min.size(); ++k) out += ",mi_b" + format_double(r.b_min[k]);
  out += '\n';
  for (std::size_t n = 0; n < r.times.size(); ++n) {
    out += format_double(r.times[n]);
    for (std::size_t k = 0; k < r.mi.size(); ++k) out += ',' + format_double(r.mi[k][n]);
    out += '\n';
  }
  return out;
}

std::string snapshots_csv(const SimulationResult& r) {
  std::string out = "t,x,u\n";
  for (const auto& row : r.snapshots) {
    const auto t = format_double(row.t);
    for (std::size_t i = 0; i < row.size(); ++i)
      out += t + ',' + format_double(row.x[i]) + ',' + format_double(row.u[i]) + '\n';
  }
  return out;
}

std::string error_csv(const SimulationResult& r, const ReferenceSolution& ref) {
  const auto total = mi_series(r, 0);
  const auto detect = mi_series(r, 1);
  const auto ref_total = ref.mi_series(r.times, total.b_min);
  const auto ref_detect = ref.mi_series(r.times, detect.b_min);
  const auto e_total = error_series(total, ref_total);
  const auto e_detect = error_series(detect, ref_detect);
  std::string out = "t,ref_total,err_total,ref_detectable,err_detectable\n";
  for (std::size_t n = 0; n < r.times.size(); ++n) {
    out += format_double(r.times[n]) + ',' + format_double(ref_total.values[n]) + ',' +
           format_double(e_total.values[n]) + ',' + format_double(ref_detect.values[n]) + ',' +
           format_double(e_detect.values[n]) + '\n';
  }
  return out;
}

namespace {

ScenarioOutcome run_one(const ScenarioConfig& cfg, const RunOptions& opts) {
  ScenarioOutcome oc;
  oc.name = cfg.name;
  const auto dir = opts.out_dir / cfg.name;
  try {
    std::filesystem::create_directories(dir);
    write_file(dir / "config.yaml", emit_config(cfg));
    const GrowthField field = build_field(cfg);
    const auto sim = cfg.simulation();
    json report;
    report["scenario"] = cfg.name;

    if (opts.validate_only) {
      const auto hyp = validate_hypotheses(field, cfg.window.start, cfg.window.horizon,
                                           sim.hypothesis_samples);
      const double f0 = colonization_rate(cfg.seeding, primary_tumor_exact(cfg.growth,
                                                                            cfg.window.start));
      const auto comp = check_compatibility(field, cfg.seeding, cfg.initial_density(),
                                            cfg.window.start, f0);
      report["solver"] = "skipped";
      report["hypotheses"] = hypotheses_json(hyp);
      report["compatibility"] = compatibility_json(comp);
      write_file(dir / "report.json", report.dump(2) + "\n");
      if (!hyp.ok()) {
        oc.messages.push_back("hypothesis validation failed");
        if (opts.strict) oc.status = kExitStrict;
      }
      return oc;
    }

    std::optional<ReferenceSolution> ref;
    if (opts.oracle) {
      ReferenceConfig rc;
      rc.oracle = *opts.oracle;
      rc.refinement = cfg.solver.refinement;
      rc.base_step = cfg.solver.base_step;
      rc.treatment_start = cfg.window.treatment_start;
      rc.primary_mode = cfg.solver.primary_mode;
      try {
        ref.emplace(field, cfg.seeding, cfg.initial_density(), rc);
      } catch (const ValidationError& e) {
        oc.status = kExitConfig;
        oc.messages.push_back(std::string("oracle does not apply: ") + e.what());
        return oc;
      }
    }

    auto res = run_simulation(field, cfg.seeding, cfg.initial_density(), sim);
    write_file(dir / "mi.csv", mi_csv(res));
    write_file(dir / "snapshots.csv", snapshots_csv(res));
    if (ref) write_file(dir / "error.csv", error_csv(res, *ref));

    const auto violations = strict_violations(res);
    report["solver"] = "completed";
    report["kernel"] = res.kernel;
    report["steps"] = res.times.size() - 1;
    report["hypotheses"] = hypotheses_json(res.hypotheses);
    report["compatibility"] = compatibility_json(res.compatibility);
    report["apriori"] = {{"holds", res.apriori.holds},
                         {"first_violation_t", optional_num(res.apriori.first_violation_t)},
                         {"max_ratio", res.apriori.max_ratio}};
    const auto& inv = res.invariants;
    report["invariants"] = {{"min_u", inv.min_u},
                            {"max_abs_diagonal", inv.max_abs_diagonal},
                            {"monotone", inv.monotone},
                            {"merged_cells", inv.merged_cells},
                            {"max_row_length", inv.max_row_length}};
    report["violations"] = violations;
    json finals = json::object();
    for (std::size_t k = 0; k < res.b_min.size(); ++k)
      finals[format_double(res.b_min[k])] = res.mi[k].back();
    report["final_mi"] = finals;
    write_file(dir / "report.json", report.dump(2) + "\n");

    for (const auto& v : violations) oc.messages.push_back(v);
    if (opts.strict && !violations.empty()) oc.status = kExitStrict;
    oc.result = std::move(res);
  } catch (const ConfigError& e) {
    oc.status = kExitConfig;
    oc.messages.push_back(e.what());
  } catch (const ValidationError& e) {
    oc.status = kExitConfig;
    oc.messages.push_back(e.what());
  } catch (const std::exception& e) {
    oc.status = kExitSolver;
    oc.messages.push_back(e.what());
  }
  return oc;
}

}  // namespace

RunSummary run_scenarios(const std::vector<ScenarioConfig>& configs, const RunOptions& opts) {
  RunSummary summary;
  summary.outcomes.resize(configs.size());
  {
    std::map<std::string, int> seen;
    for (const auto& c : configs)
      if (++seen[c.name] > 1) {
        summary.exit_code = kExitConfig;
        ScenarioOutcome oc;
        oc.name = c.name;
        oc.status = kExitConfig;
        oc.messages.push_back("duplicate scenario name '" + c.name + "'");
        summary.outcomes = {oc};
        return summary;
      }
  }
  std::filesystem::create_directories(opts.out_dir);

  const std::size_t workers = std::clamp<std::size_t>(opts.parallel, 1, std::max<std::size_t>(1, configs.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++)
      summary.outcomes[i] = run_one(configs[i], opts);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  // Comparison across completed runs sharing a window.
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!summary.outcomes[i].result) continue;
    bool placed = false;
    for (auto& g : groups) {
      const auto j = g.front();
      if (configs[j].window == configs[i].window) {
        g.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({i});
  }
  std::size_t written = 0;
  for (auto& g : groups) {
    if (g.size() < 2) continue;
    const auto base = std::find_if(g.begin(), g.end(), [&](std::size_t i) {
      return !configs[i].chemo && !configs[i].radio;
    });
    if (base != g.end()) std::rotate(g.begin(), base, base + 1);
    std::vector<std::pair<std::string, const SimulationResult*>> runs;
    for (auto i : g) runs.emplace_back(configs[i].name, &*summary.outcomes[i].result);
    const auto& w = configs[g.front()].window;
    try {
      const auto rep = comparison_report(runs, {w.treatment_start, w.treatment_end, w.horizon});
      const auto suffix = written == 0 ? std::string() : "-" + std::to_string(written + 1);
      write_file(opts.out_dir / ("comparison" + suffix + ".csv"), rep.table_csv());
      write_file(opts.out_dir / ("ratios" + suffix + ".csv"), rep.ratio_csv());
      ++written;
    } catch (const std::exception& e) {
      summary.outcomes[g.front()].messages.push_back(std::string("comparison skipped: ") +
                                                     e.what());
    }
  }

  bool config_err = false, solver_err = false, strict_err = false;
  for (const auto& oc : summary.outcomes) {
    config_err |= oc.status == kExitConfig;
    solver_err |= oc.status == kExitSolver;
    strict_err |= oc.status == kExitStrict;
  }
  summary.exit_code = config_err ? kExitConfig : solver_err ? kExitSolver
                                              : strict_err ? kExitStrict : kExitOk;
  return summary;
}

}  // namespace metastat::scenario
