#pragma once

#include <span>
#include <vector>

#include "metastat/field.hpp"

namespace metastat {

struct FlowSolverConfig {
  /// Upper bound on the RK4 substep, days.
  double base_step = 0.25;
  /// Relative tolerance for boundary events: x within tol*max(1,|target|),
  /// time within tol*max(1,|t|).
  double event_tolerance = 1e-10;

  void validate() const;
  double x_tol(double target) const;
  double t_tol(double t) const;
};

/// Phi_{(s,x)}(t) for t >= s or t <= s. RK4 in ln x, restarted at every discontinuity
/// of the field so no stage straddles a jump. Results within the event
/// tolerance of 1 or b are snapped onto the boundary.
double flow(const GrowthField& f, double s, double x, double t, const FlowSolverConfig& cfg);

enum class PrimaryMode {
  /// After t0 follow the treated flow from x_p(t0).
  Continuous,
  /// After t0 follow Phi_{(t0,1)}, restarting from one cell.
  PaperLiteral,
};

struct Trajectory {
  double seed_t = 0.0;
  double seed_x = 1.0;
  std::vector<double> times;
  std::vector<double> values;

  /// Value at a node time; throws if `t` is not a node.
  double at(double t) const;
};

/// Primary tumor y_p sampled at `times` (sorted, starting at or after 0).
/// Closed-form Gompertz on [0, t0]; after t0 according to `mode`. The node
/// set also contains t0 and every field discontinuity inside the span.
Trajectory primary_trajectory(const GrowthField& f, double t0, PrimaryMode mode,
                              std::span<const double> times, const FlowSolverConfig& cfg);

enum class Region { Omega1, Omega2, Omega3 };

const char* to_string(Region r);

/// Region of (t, x) relative to the curves Phi_{(t0,1)} and Phi_{(t0,b)};
/// points within tolerance of a curve count as Omega2.
Region classify(const GrowthField& f, double t0, double t, double x, const FlowSolverConfig& cfg);

/// Time s in [t0, t] with Phi_{(t,x)}(s) = 1, by backward integration and
/// bisection. Throws SolverError if the characteristic never reaches x = 1.
double entry_time_phi(const GrowthField& f, double t0, double t, double x,
                      const FlowSolverConfig& cfg);

/// Time s in [t0, t] with Phi_{(t,x)}(s) = b.
double entry_time_theta(const GrowthField& f, double t0, double t, double x,
                        const FlowSolverConfig& cfg);

/// Phi_{(t,x)}(t0), checked to lie in [1, b].
double entry_point_psi(const GrowthField& f, double t0, double t, double x,
                       const FlowSolverConfig& cfg);

}  // namespace metastat
