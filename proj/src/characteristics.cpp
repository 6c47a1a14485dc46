#include "metastat/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "metastat/errors.hpp"

namespace metastat {

void FlowSolverConfig::validate() const {
  if (!(base_step > 0.0)) throw ValidationError("flow base_step must be > 0");
  if (!(event_tolerance > 0.0)) throw ValidationError("event_tolerance must be > 0");
}

double FlowSolverConfig::x_tol(double target) const {
  return event_tolerance * std::max(1.0, std::abs(target));
}

double FlowSolverConfig::t_tol(double t) const {
  return event_tolerance * std::max(1.0, std::abs(t));
}

namespace {

// One RK4 step of signed length h from (t, x). [lo, hi] is the smooth piece
// that contains the step; treatment levels are taken from inside it.
double rk4(const GrowthField& f, double t, double x, double h, double lo, double hi) {
  return simd::rk4_log_step(f.slice_within(t, lo, hi), f.slice_within(t + 0.5 * h, lo, hi),
                            f.slice_within(t + h, lo, hi), h, x);
}

struct Substep {
  double t_a, x_a, t_b, x_b, lo, hi;
};

// Integrates from (s, x) to t, breaking at discontinuities. `visit` sees every
// substep and returns true to stop early. Returns the final state.
template <class Visit>
double integrate(const GrowthField& f, double s, double x, double t, const FlowSolverConfig& cfg,
                 Visit&& visit) {
  if (!f.window().contains(s) || !f.window().contains(t))
    throw DomainError("flow: time " + std::to_string(f.window().contains(s) ? t : s) +
                      " outside the field window");
  if (s == t) return x;
  const double dir = t > s ? 1.0 : -1.0;

  std::vector<double> cuts;
  for (double d : f.discontinuities())
    if ((d - s) * dir > 0.0 && (t - d) * dir > 0.0) cuts.push_back(d);
  if (dir < 0.0) std::reverse(cuts.begin(), cuts.end());
  cuts.push_back(t);

  double ta = s;
  double xa = x;
  for (double tb : cuts) {
    const double span = std::abs(tb - ta);
    const auto n = static_cast<long>(std::max(1.0, std::ceil(span / cfg.base_step - 1e-9)));
    const double h = (tb - ta) / static_cast<double>(n);
    const double lo = std::min(ta, tb);
    const double hi = std::max(ta, tb);
    for (long i = 0; i < n; ++i) {
      const double t0 = ta + static_cast<double>(i) * h;
      const double t1 = i + 1 == n ? tb : ta + static_cast<double>(i + 1) * h;
      const double x1 = rk4(f, t0, xa, t1 - t0, lo, hi);
      if (visit(Substep{t0, xa, t1, x1, lo, hi})) return x1;
      xa = x1;
    }
    ta = tb;
  }
  return xa;
}

double snap(double v, double b, const FlowSolverConfig& cfg) {
  if (v < 1.0 && v >= 1.0 - cfg.x_tol(1.0)) return 1.0;
  if (v > b && v <= b + cfg.x_tol(b)) return b;
  return v;
}

// Backward search for the time the characteristic through (t, x) hits `target`.
double entry_time(const GrowthField& f, double t0, double t, double x, double target,
                  const FlowSolverConfig& cfg) {
  cfg.validate();
  if (std::abs(x - target) <= cfg.x_tol(target)) return t;
  const double side = x > target ? 1.0 : -1.0;
  std::optional<Substep> hit;
  integrate(f, t, x, t0, cfg, [&](const Substep& st) {
    if ((st.x_b - target) * side <= 0.0) {
      hit = st;
      return true;
    }
    return false;
  });
  if (!hit) {
    throw SolverError("characteristic through (" + std::to_string(t) + ", " +
                      std::to_string(x) + ") does not reach x = " + std::to_string(target) +
                      " after t0");
  }
  // Bisection on the fraction of the substep.
  double lo = 0.0;
  double hi = 1.0;
  const double h = hit->t_b - hit->t_a;
  const double tol = cfg.t_tol(hit->t_a);
  while (std::abs(hi - lo) * std::abs(h) > tol) {
    const double mid = 0.5 * (lo + hi);
    const double xm = rk4(f, hit->t_a, hit->x_a, mid * h, hit->lo, hit->hi);
    if (std::abs(xm - target) <= cfg.x_tol(target)) return hit->t_a + mid * h;
    if ((xm - target) * side > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return hit->t_a + 0.5 * (lo + hi) * h;
}

}  // namespace

double flow(const GrowthField& f, double s, double x, double t, const FlowSolverConfig& cfg) {
  cfg.validate();
  if (!(x > 0.0)) throw DomainError("flow: x must be > 0");
  const double v = integrate(f, s, x, t, cfg, [](const Substep&) { return false; });
  return snap(v, f.growth().b, cfg);
}

double Trajectory::at(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end() || *it != t)
    throw DomainError("trajectory has no node at t = " + std::to_string(t));
  return values[static_cast<std::size_t>(it - times.begin())];
}

Trajectory primary_trajectory(const GrowthField& f, double t0, PrimaryMode mode,
                              std::span<const double> times, const FlowSolverConfig& cfg) {
  Trajectory out;
  out.times.assign(times.begin(), times.end());
  if (!out.times.empty()) {
    const double lo = out.times.front();
    const double hi = out.times.back();
    if (t0 >= lo && t0 <= hi) out.times.push_back(t0);
    for (double d : f.discontinuities())
      if (d >= lo && d <= hi) out.times.push_back(d);
  }
  std::sort(out.times.begin(), out.times.end());
  out.times.erase(std::unique(out.times.begin(), out.times.end()), out.times.end());

  const auto& g = f.growth();
  const double x_at_t0 = primary_tumor_exact(g, t0);
  out.seed_t = t0;
  out.seed_x = mode == PrimaryMode::Continuous ? x_at_t0 : 1.0;
  out.values.reserve(out.times.size());

  double prev_t = t0;
  double prev_x = out.seed_x;
  for (double t : out.times) {
    if (t <= t0) {
      out.values.push_back(primary_tumor_exact(g, t));
      continue;
    }
    prev_x = flow(f, prev_t, prev_x, t, cfg);
    prev_t = t;
    out.values.push_back(prev_x);
  }
  return out;
}

const char* to_string(Region r) {
  switch (r) {
    case Region::Omega1: return "Omega1";
    case Region::Omega2: return "Omega2";
    case Region::Omega3: return "Omega3";
  }
  return "?";
}

Region classify(const GrowthField& f, double t0, double t, double x, const FlowSolverConfig& cfg) {
  const double b = f.growth().b;
  const double lower = flow(f, t0, 1.0, t, cfg);
  if (x < lower - cfg.x_tol(lower)) return Region::Omega1;
  const double upper = flow(f, t0, b, t, cfg);
  if (x > upper + cfg.x_tol(upper)) return Region::Omega3;
  return Region::Omega2;
}

double entry_time_phi(const GrowthField& f, double t0, double t, double x,
                      const FlowSolverConfig& cfg) {
  return entry_time(f, t0, t, x, 1.0, cfg);
}

double entry_time_theta(const GrowthField& f, double t0, double t, double x,
                        const FlowSolverConfig& cfg) {
  return entry_time(f, t0, t, x, f.growth().b, cfg);
}

double entry_point_psi(const GrowthField& f, double t0, double t, double x,
                       const FlowSolverConfig& cfg) {
  const double b = f.growth().b;
  const double y = flow(f, t, x, t0, cfg);
  if (y < 1.0 - cfg.x_tol(1.0) || y > b + cfg.x_tol(b))
    throw SolverError("entry point " + std::to_string(y) + " outside [1, b]");
  return std::clamp(y, 1.0, b);
}

}  // namespace metastat
