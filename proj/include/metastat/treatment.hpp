#pragma once

#include <optional>
#include <span>
#include <vector>

namespace metastat {

/// Piecewise-constant infusion: dose[i] is spread uniformly over
/// [times[i], times[i+1]). Zero-dose intervals encode gaps between courses.
struct InfusionSchedule {
  std::vector<double> times;
  std::vector<double> doses;

  void validate() const;
  bool operator==(const InfusionSchedule&) const = default;
  double start() const { return times.front(); }
};

struct PkParams {
  double k_e = 0.0;
  double k12 = 0.0;
  double k21 = 0.0;
  double volume = 1.0;

  void validate() const;
  bool operator==(const PkParams&) const = default;
};

struct ChemoProtocol {
  InfusionSchedule schedule;
  PkParams pk;
  double gamma = 0.0;
  double x_bar = 1.0;

  void validate() const;
  bool operator==(const ChemoProtocol&) const = default;
};

struct RadioProtocol {
  std::vector<double> session_times;
  double dose = 0.0;       // Gy per session
  double epsilon = 0.0;    // pulse half-width, days
  double alpha_eff = 0.0;  // 1/Gy
  double gamma_r = 0.0;
  double x_hat = 1.0;

  void validate() const;
  bool operator==(const RadioProtocol&) const = default;
};

/// Central (c1) and peripheral (c2) concentrations.
struct PkState {
  double c1 = 0.0;
  double c2 = 0.0;
};

double infusion_rate(const InfusionSchedule& s, double t);

/// Exact solution of the two-compartment system over a span `tau` with a
/// constant infusion `rate` (mass/day).
PkState pk_advance(const PkParams& pk, const PkState& state, double rate, double tau);

/// States at every grid instant. `grid` must start at the schedule start and
/// contain every infusion breakpoint inside its span.
std::vector<PkState> pk_solve(const ChemoProtocol& proto, std::span<const double> grid);

/// Kill probability 1 - exp(-alpha_eff D_r(t)); pulses are closed intervals.
double radiation_kill(const RadioProtocol& proto, double t);

/// Default smoothing width of the Heaviside blend for a threshold.
constexpr double default_smoothing(double threshold) { return 1e-3 * threshold; }

/// gamma (x - x_bar) H_delta(x - x_bar); smoothing = 0 is the exact Heaviside.
double chemo_kill_profile(const ChemoProtocol& proto, double x, double smoothing);
double radio_kill_profile(const RadioProtocol& proto, double x, double smoothing);

/// Sorted, duplicate-free union of infusion breakpoints and pulse edges.
std::vector<double> discontinuity_times(const ChemoProtocol* chemo, const RadioProtocol* radio);

}  // namespace metastat
