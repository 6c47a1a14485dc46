#pragma once

#include <cmath>

namespace metastat::simd {

/// One kill term K(x) * level frozen at a time instant:
/// coef * (x - threshold) * H_delta(x - threshold).
/// `coef` already folds the efficacy constant and the time level (gamma*C(t)
/// or gamma_r*R(t)); coef == 0 disables the term.
struct KillSlice {
  double coef = 0.0;
  double threshold = 0.0;
  double delta = 0.0;
};

/// The growth field G(t, .) frozen at one instant t.
struct FieldSlice {
  double a = 0.0;
  double log_b = 0.0;
  KillSlice chemo;
  KillSlice radio;
};

// Quintic C2 blend: 0 below 0, 1 above delta, value/first/second derivative
// continuous at both ends. delta == 0 gives the exact Heaviside.
inline double smooth_heaviside(double y, double delta) {
  if (delta <= 0.0) return y > 0.0 ? 1.0 : 0.0;
  if (y <= 0.0) return 0.0;
  if (y >= delta) return 1.0;
  const double s = y / delta;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

inline double smooth_heaviside_d1(double y, double delta) {
  if (delta <= 0.0 || y <= 0.0 || y >= delta) return 0.0;
  const double s = y / delta;
  const double t = 1.0 - s;
  return 30.0 * s * s * t * t / delta;
}

inline double smooth_heaviside_d2(double y, double delta) {
  if (delta <= 0.0 || y <= 0.0 || y >= delta) return 0.0;
  const double s = y / delta;
  return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (delta * delta);
}

inline double kill_value(const KillSlice& k, double x) {
  if (k.coef == 0.0) return 0.0;
  const double y = x - k.threshold;
  return k.coef * y * smooth_heaviside(y, k.delta);
}

inline double kill_dx(const KillSlice& k, double x) {
  if (k.coef == 0.0) return 0.0;
  const double y = x - k.threshold;
  return k.coef * (smooth_heaviside(y, k.delta) + y * smooth_heaviside_d1(y, k.delta));
}

inline double kill_dxx(const KillSlice& k, double x) {
  if (k.coef == 0.0) return 0.0;
  const double y = x - k.threshold;
  return k.coef *
         (2.0 * smooth_heaviside_d1(y, k.delta) + y * smooth_heaviside_d2(y, k.delta));
}

/// G(t, x) for x > 0. Reference formula for every kernel implementation.
inline double growth_rate(const FieldSlice& f, double x) {
  const double g = f.a * x * (f.log_b - std::log(x));
  return g - kill_value(f.chemo, x) - kill_value(f.radio, x);
}

inline double growth_rate_dx(const FieldSlice& f, double x) {
  const double gx = f.a * (f.log_b - std::log(x)) - f.a;
  return gx - kill_dx(f.chemo, x) - kill_dx(f.radio, x);
}

inline double growth_rate_dxx(const FieldSlice& f, double x) {
  return -f.a / x - kill_dxx(f.chemo, x) - kill_dxx(f.radio, x);
}

/// K(x)/x, the kill term's share of d(ln x)/dt.
inline double kill_ratio(const KillSlice& k, double x) {
  if (k.coef == 0.0) return 0.0;
  const double y = x - k.threshold;
  return k.coef * (y / x) * smooth_heaviside(y, k.delta);
}

/// G(t, x)/x as a function of l = ln x.
inline double log_velocity(const FieldSlice& f, double l) {
  double v = f.a * (f.log_b - l);
  if (f.chemo.coef != 0.0 || f.radio.coef != 0.0) {
    const double x = std::exp(l);
    v -= kill_ratio(f.chemo, x) + kill_ratio(f.radio, x);
  }
  return v;
}

/// One classical RK4 step of dx/dt = G(t, x) taken in l = ln x. The Gompertz
/// part is linear in l, so the truncation error scales with a rather than with
/// a ln b as it would in x. A point with zero increment (x = b untreated) is
/// left bit-identical.
inline double rk4_log_step(const FieldSlice& begin, const FieldSlice& mid, const FieldSlice& end,
                           double h, double x) {
  const double half = 0.5 * h;
  const double l = std::log(x);
  const double k1 = log_velocity(begin, l);
  const double k2 = log_velocity(mid, l + half * k1);
  const double k3 = log_velocity(mid, l + half * k2);
  const double k4 = log_velocity(end, l + h * k3);
  const double dl = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return dl == 0.0 ? x : std::exp(l + dl);
}

}  // namespace metastat::simd
