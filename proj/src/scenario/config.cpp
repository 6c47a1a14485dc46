#include "metastat/scenario/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "metastat/errors.hpp"
#include "metastat/metrics.hpp"

namespace metastat::scenario {

ConfigError::ConfigError(const std::string& msg, std::string key, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
      key_(std::move(key)),
      line_(line) {}

const char* to_string(BoundaryQuadrature q) {
  return q == BoundaryQuadrature::Paper ? "paper" : "pure-trapezoid";
}

const char* to_string(DiagonalRule d) { return d == DiagonalRule::Zero ? "zero" : "propagate"; }

const char* to_string(PrimaryMode m) {
  return m == PrimaryMode::Continuous ? "continuous" : "paper-literal";
}

namespace {

std::size_t line_of(const YAML::Node& n) {
  const auto mark = n.Mark();
  return mark.line >= 0 ? static_cast<std::size_t>(mark.line) + 1 : 0;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const YAML::Node& node, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError("'" + path + "' must be a mapping", path, line_of(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return key == k; });
    if (!known)
      throw ConfigError("unknown key '" + join(path, key) + "'", join(path, key),
                        line_of(kv.first));
  }
}

double to_double(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError("'" + key + "' must be a number", key, line_of(n));
  const auto text = n.Scalar();
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  double v = 0.0;
  in >> v;
  if (in.fail() || !(in >> std::ws).eof())
    throw ConfigError("'" + key + "' is not a number: '" + text + "'", key, line_of(n));
  return v;
}

double req_double(const YAML::Node& parent, const std::string& path, const char* key) {
  const auto n = parent[key];
  if (!n) throw ConfigError("missing key '" + join(path, key) + "'", join(path, key),
                            line_of(parent));
  return to_double(n, join(path, key));
}

double opt_double(const YAML::Node& parent, const std::string& path, const char* key,
                  double fallback) {
  const auto n = parent[key];
  return n ? to_double(n, join(path, key)) : fallback;
}

std::size_t opt_count(const YAML::Node& parent, const std::string& path, const char* key,
                      std::size_t fallback) {
  const auto n = parent[key];
  if (!n) return fallback;
  const double v = to_double(n, join(path, key));
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e15)
    throw ConfigError("'" + join(path, key) + "' must be a non-negative integer", join(path, key),
                      line_of(n));
  return static_cast<std::size_t>(v);
}

std::vector<double> to_list(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw ConfigError("'" + key + "' must be a list", key, line_of(n));
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i)
    out.push_back(to_double(n[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

template <class Enum>
Enum to_enum(const YAML::Node& n, const std::string& key,
             std::initializer_list<std::pair<const char*, Enum>> options) {
  if (!n.IsScalar()) throw ConfigError("'" + key + "' must be a string", key, line_of(n));
  const auto v = n.Scalar();
  std::string names;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    names += names.empty() ? name : std::string(" | ") + name;
  }
  throw ConfigError("'" + key + "' must be one of " + names + ", got '" + v + "'", key,
                    line_of(n));
}

// Courses shorthand: `count` infusions of `duration` days every `period` days.
InfusionSchedule expand_courses(const YAML::Node& n, const std::string& path) {
  check_keys(n, path, {"start", "count", "period", "duration", "dose"});
  const double start = req_double(n, path, "start");
  const std::size_t count = opt_count(n, path, "count", 1);
  const double period = opt_double(n, path, "period", 0.0);
  const double duration = req_double(n, path, "duration");
  const double dose = req_double(n, path, "dose");
  if (count == 0) throw ConfigError("'" + path + ".count' must be >= 1", path, line_of(n));
  if (!(duration > 0.0)) throw ConfigError("'" + path + ".duration' must be > 0", path, line_of(n));
  if (count > 1 && !(period > duration))
    throw ConfigError("'" + path + ".period' must exceed the duration", path, line_of(n));
  InfusionSchedule s;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = start + static_cast<double>(i) * period;
    s.times.push_back(t);
    s.doses.push_back(dose);
    s.times.push_back(t + duration);
    if (i + 1 < count) s.doses.push_back(0.0);
  }
  return s;
}

ChemoProtocol parse_chemo(const YAML::Node& n) {
  const std::string path = "chemo";
  check_keys(n, path, {"schedule", "courses", "pk", "gamma", "x_bar"});
  ChemoProtocol c;
  if (n["schedule"] && n["courses"])
    throw ConfigError("'chemo' takes either 'schedule' or 'courses', not both", path, line_of(n));
  if (const auto s = n["schedule"]) {
    check_keys(s, "chemo.schedule", {"times", "doses"});
    if (!s["times"] || !s["doses"])
      throw ConfigError("'chemo.schedule' needs 'times' and 'doses'", "chemo.schedule",
                        line_of(s));
    c.schedule.times = to_list(s["times"], "chemo.schedule.times");
    c.schedule.doses = to_list(s["doses"], "chemo.schedule.doses");
  } else if (const auto cs = n["courses"]) {
    c.schedule = expand_courses(cs, "chemo.courses");
  } else {
    throw ConfigError("'chemo' needs 'schedule' or 'courses'", path, line_of(n));
  }
  const auto pk = n["pk"];
  if (!pk) throw ConfigError("missing key 'chemo.pk'", "chemo.pk", line_of(n));
  check_keys(pk, "chemo.pk", {"k_e", "k12", "k21", "volume"});
  c.pk.k_e = req_double(pk, "chemo.pk", "k_e");
  c.pk.k12 = opt_double(pk, "chemo.pk", "k12", 0.0);
  c.pk.k21 = opt_double(pk, "chemo.pk", "k21", 0.0);
  c.pk.volume = opt_double(pk, "chemo.pk", "volume", 1.0);
  c.gamma = req_double(n, path, "gamma");
  c.x_bar = req_double(n, path, "x_bar");
  return c;
}

RadioProtocol parse_radio(const YAML::Node& n) {
  const std::string path = "radio";
  check_keys(n, path, {"session_times", "sessions", "dose", "epsilon", "alpha_eff", "gamma_r",
                       "x_hat"});
  RadioProtocol r;
  if (n["session_times"] && n["sessions"])
    throw ConfigError("'radio' takes either 'session_times' or 'sessions', not both", path,
                      line_of(n));
  if (const auto s = n["session_times"]) {
    r.session_times = to_list(s, "radio.session_times");
  } else if (const auto s2 = n["sessions"]) {
    check_keys(s2, "radio.sessions", {"start", "count", "period"});
    const double start = req_double(s2, "radio.sessions", "start");
    const std::size_t count = opt_count(s2, "radio.sessions", "count", 1);
    const double period = opt_double(s2, "radio.sessions", "period", 1.0);
    for (std::size_t i = 0; i < count; ++i)
      r.session_times.push_back(start + static_cast<double>(i) * period);
  } else {
    throw ConfigError("'radio' needs 'session_times' or 'sessions'", path, line_of(n));
  }
  r.dose = req_double(n, path, "dose");
  r.epsilon = req_double(n, path, "epsilon");
  r.alpha_eff = req_double(n, path, "alpha_eff");
  r.gamma_r = req_double(n, path, "gamma_r");
  r.x_hat = req_double(n, path, "x_hat");
  return r;
}

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid '" + key + "': " + why, key);
  };
  if (name.empty()) fail("name", "must not be empty");
  if (name.find_first_of("/\\") != std::string::npos || name == "." || name == "..")
    fail("name", "must be usable as a directory name");
  try {
    growth.validate();
  } catch (const std::exception& e) {
    fail("growth", e.what());
  }
  try {
    seeding.validate();
  } catch (const std::exception& e) {
    fail("seeding", e.what());
  }
  const auto& w = window;
  if (!(w.start >= 0.0)) fail("window.start", "must be >= 0");
  if (!(w.treatment_start >= w.start)) fail("window.treatment_start", "t0 must be >= start");
  if (!(w.treatment_end >= w.treatment_start))
    fail("window.treatment_end", "t0 <= T1 violated (treatment_start > treatment_end)");
  if (!(w.horizon >= w.treatment_end)) fail("window.horizon", "T1 <= T violated");
  if (!(w.horizon > w.start)) fail("window.horizon", "must exceed window.start");
  if (chemo) {
    try {
      chemo->validate();
    } catch (const std::exception& e) {
      fail("chemo", e.what());
    }
    if (chemo->schedule.start() < w.start) fail("chemo.schedule", "starts before the window");
  }
  if (radio) {
    try {
      radio->validate();
    } catch (const std::exception& e) {
      fail("radio", e.what());
    }
  }
  const auto& s = solver;
  if (!(s.base_step > 0.0)) fail("solver.base_step", "must be > 0");
  if (s.flow_step && !(*s.flow_step > 0.0)) fail("solver.flow_step", "must be > 0");
  if (!(s.event_tolerance > 0.0)) fail("solver.event_tolerance", "must be > 0");
  if (s.smoothing && !(*s.smoothing >= 0.0)) fail("solver.smoothing", "must be >= 0");
  if (s.refinement < 1) fail("solver.refinement", "must be >= 1");
  if (s.max_steps < 1) fail("solver.max_steps", "must be >= 1");
  if (outputs.b_min.size() < 2) fail("outputs.b_min", "needs at least two thresholds");
  for (double v : outputs.b_min)
    if (!(v >= 1.0 && v <= growth.b)) fail("outputs.b_min", "thresholds must lie in [1, b]");
  for (double t : outputs.snapshot_times)
    if (!(t >= w.start && t <= w.horizon)) fail("outputs.snapshot_times", "outside the window");
  if (initial) {
    if (initial->x.size() != initial->u.size() || initial->x.size() < 2)
      fail("initial_density", "x and u need the same length >= 2");
    if (!std::is_sorted(initial->x.begin(), initial->x.end()) ||
        std::adjacent_find(initial->x.begin(), initial->x.end()) != initial->x.end())
      fail("initial_density.x", "must be strictly increasing");
    if (initial->x.front() < 1.0 || initial->x.back() > growth.b)
      fail("initial_density.x", "must lie in [1, b]");
    for (double v : initial->u)
      if (!(v >= 0.0)) fail("initial_density.u", "must be >= 0");
  }
}

SimulationConfig ScenarioConfig::simulation() const {
  SimulationConfig c;
  c.window = {window.start, window.horizon};
  c.treatment_start = window.treatment_start;
  c.base_step = solver.base_step;
  c.flow.base_step = solver.flow_step.value_or(solver.base_step);
  c.flow.event_tolerance = solver.event_tolerance;
  c.scheme.quadrature = solver.quadrature;
  c.scheme.diagonal = solver.diagonal;
  c.primary_mode = solver.primary_mode;
  c.b_min = outputs.b_min;
  c.snapshot_times = outputs.snapshot_times;
  c.max_steps = solver.max_steps;
  return c;
}

InitialDensity ScenarioConfig::initial_density() const {
  if (!initial) return InitialDensity::zero();
  return InitialDensity::sampled(initial->x, initial->u);
}

ScenarioConfig parse_config(std::string_view text, std::string_view fallback_name) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("malformed document: " + e.msg, {},
                      e.mark.line >= 0 ? static_cast<std::size_t>(e.mark.line) + 1 : 0);
  }
  if (!root || !root.IsMap()) throw ConfigError("document must be a mapping");
  check_keys(root, "", {"name", "growth", "seeding", "window", "chemo", "radio", "solver",
                        "outputs", "initial_density"});

  ScenarioConfig cfg;
  cfg.name = root["name"] ? root["name"].as<std::string>() : std::string(fallback_name);

  const auto growth = root["growth"];
  if (!growth) throw ConfigError("missing key 'growth'", "growth");
  check_keys(growth, "growth", {"a", "b"});
  cfg.growth.a = req_double(growth, "growth", "a");
  cfg.growth.b = req_double(growth, "growth", "b");

  const auto seeding = root["seeding"];
  if (!seeding) throw ConfigError("missing key 'seeding'", "seeding");
  check_keys(seeding, "seeding", {"m", "alpha"});
  cfg.seeding.m = req_double(seeding, "seeding", "m");
  cfg.seeding.alpha = req_double(seeding, "seeding", "alpha");

  const auto window = root["window"];
  if (!window) throw ConfigError("missing key 'window'", "window");
  check_keys(window, "window", {"start", "treatment_start", "treatment_end", "horizon"});
  cfg.window.start = opt_double(window, "window", "start", 0.0);
  cfg.window.treatment_start = opt_double(window, "window", "treatment_start", cfg.window.start);
  cfg.window.treatment_end =
      opt_double(window, "window", "treatment_end", cfg.window.treatment_start);
  cfg.window.horizon = req_double(window, "window", "horizon");

  if (const auto c = root["chemo"]) cfg.chemo = parse_chemo(c);
  if (const auto r = root["radio"]) cfg.radio = parse_radio(r);

  if (const auto s = root["solver"]) {
    check_keys(s, "solver", {"base_step", "flow_step", "event_tolerance", "smoothing", "quadrature",
                             "diagonal", "primary_mode", "refinement", "max_steps"});
    auto& sv = cfg.solver;
    sv.base_step = opt_double(s, "solver", "base_step", sv.base_step);
    if (s["flow_step"]) sv.flow_step = to_double(s["flow_step"], "solver.flow_step");
    sv.event_tolerance = opt_double(s, "solver", "event_tolerance", sv.event_tolerance);
    if (s["smoothing"]) sv.smoothing = to_double(s["smoothing"], "solver.smoothing");
    if (s["quadrature"])
      sv.quadrature = to_enum<BoundaryQuadrature>(
          s["quadrature"], "solver.quadrature",
          {{"paper", BoundaryQuadrature::Paper},
           {"pure-trapezoid", BoundaryQuadrature::PureTrapezoid}});
    if (s["diagonal"])
      sv.diagonal = to_enum<DiagonalRule>(
          s["diagonal"], "solver.diagonal",
          {{"zero", DiagonalRule::Zero}, {"propagate", DiagonalRule::Propagate}});
    if (s["primary_mode"])
      sv.primary_mode = to_enum<PrimaryMode>(
          s["primary_mode"], "solver.primary_mode",
          {{"continuous", PrimaryMode::Continuous}, {"paper-literal", PrimaryMode::PaperLiteral}});
    sv.refinement = opt_count(s, "solver", "refinement", sv.refinement);
    sv.max_steps = opt_count(s, "solver", "max_steps", sv.max_steps);
  }

  if (const auto o = root["outputs"]) {
    check_keys(o, "outputs", {"snapshot_times", "b_min"});
    if (o["snapshot_times"])
      cfg.outputs.snapshot_times = to_list(o["snapshot_times"], "outputs.snapshot_times");
    if (o["b_min"]) cfg.outputs.b_min = to_list(o["b_min"], "outputs.b_min");
  }

  if (const auto init = root["initial_density"]) {
    check_keys(init, "initial_density", {"x", "u"});
    InitialSamples s;
    if (!init["x"] || !init["u"])
      throw ConfigError("'initial_density' needs 'x' and 'u'", "initial_density", line_of(init));
    s.x = to_list(init["x"], "initial_density.x");
    s.u = to_list(init["u"], "initial_density.u");
    cfg.initial = std::move(s);
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), path.stem().string());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what(), e.key());
  }
}

namespace {

void emit_num(YAML::Emitter& out, const char* key, double v) {
  out << YAML::Key << key << YAML::Value << format_double(v);
}

void emit_list(YAML::Emitter& out, const char* key, const std::vector<double>& v) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << format_double(x);
  out << YAML::EndSeq;
}

}  // namespace

std::string emit_config(const ScenarioConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << cfg.name;

  out << YAML::Key << "growth" << YAML::Value << YAML::BeginMap;
  emit_num(out, "a", cfg.growth.a);
  emit_num(out, "b", cfg.growth.b);
  out << YAML::EndMap;

  out << YAML::Key << "seeding" << YAML::Value << YAML::BeginMap;
  emit_num(out, "m", cfg.seeding.m);
  emit_num(out, "alpha", cfg.seeding.alpha);
  out << YAML::EndMap;

  out << YAML::Key << "window" << YAML::Value << YAML::BeginMap;
  emit_num(out, "start", cfg.window.start);
  emit_num(out, "treatment_start", cfg.window.treatment_start);
  emit_num(out, "treatment_end", cfg.window.treatment_end);
  emit_num(out, "horizon", cfg.window.horizon);
  out << YAML::EndMap;

  if (cfg.chemo) {
    const auto& c = *cfg.chemo;
    out << YAML::Key << "chemo" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
    emit_list(out, "times", c.schedule.times);
    emit_list(out, "doses", c.schedule.doses);
    out << YAML::EndMap;
    out << YAML::Key << "pk" << YAML::Value << YAML::BeginMap;
    emit_num(out, "k_e", c.pk.k_e);
    emit_num(out, "k12", c.pk.k12);
    emit_num(out, "k21", c.pk.k21);
    emit_num(out, "volume", c.pk.volume);
    out << YAML::EndMap;
    emit_num(out, "gamma", c.gamma);
    emit_num(out, "x_bar", c.x_bar);
    out << YAML::EndMap;
  }

  if (cfg.radio) {
    const auto& r = *cfg.radio;
    out << YAML::Key << "radio" << YAML::Value << YAML::BeginMap;
    emit_list(out, "session_times", r.session_times);
    emit_num(out, "dose", r.dose);
    emit_num(out, "epsilon", r.epsilon);
    emit_num(out, "alpha_eff", r.alpha_eff);
    emit_num(out, "gamma_r", r.gamma_r);
    emit_num(out, "x_hat", r.x_hat);
    out << YAML::EndMap;
  }

  const auto& s = cfg.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  emit_num(out, "base_step", s.base_step);
  if (s.flow_step) emit_num(out, "flow_step", *s.flow_step);
  emit_num(out, "event_tolerance", s.event_tolerance);
  if (s.smoothing) emit_num(out, "smoothing", *s.smoothing);
  out << YAML::Key << "quadrature" << YAML::Value << to_string(s.quadrature);
  out << YAML::Key << "diagonal" << YAML::Value << to_string(s.diagonal);
  out << YAML::Key << "primary_mode" << YAML::Value << to_string(s.primary_mode);
  out << YAML::Key << "refinement" << YAML::Value << s.refinement;
  out << YAML::Key << "max_steps" << YAML::Value << s.max_steps;
  out << YAML::EndMap;

  out << YAML::Key << "outputs" << YAML::Value << YAML::BeginMap;
  emit_list(out, "snapshot_times", cfg.outputs.snapshot_times);
  emit_list(out, "b_min", cfg.outputs.b_min);
  out << YAML::EndMap;

  if (cfg.initial) {
    out << YAML::Key << "initial_density" << YAML::Value << YAML::BeginMap;
    emit_list(out, "x", cfg.initial->x);
    emit_list(out, "u", cfg.initial->u);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace metastat::scenario
