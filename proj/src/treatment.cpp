#include "metastat/treatment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metastat/errors.hpp"
#include "metastat/simd/field_slice.hpp"

namespace metastat {

void InfusionSchedule::validate() const {
  if (times.size() < 2) throw ValidationError("chemo.schedule needs at least two instants");
  if (doses.size() + 1 != times.size())
    throw ValidationError("chemo.schedule: expected " + std::to_string(times.size() - 1) +
                          " doses for " + std::to_string(times.size()) + " instants, got " +
                          std::to_string(doses.size()));
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw ValidationError("chemo.schedule.times must be strictly increasing");
  for (double d : doses)
    if (!(d >= 0.0)) throw ValidationError("chemo.schedule.doses must be >= 0");
}

void PkParams::validate() const {
  if (!(k_e > 0.0)) throw ValidationError("chemo.pk.k_e must be > 0");
  if (!(volume > 0.0)) throw ValidationError("chemo.pk.volume must be > 0");
  if (!(k12 >= 0.0) || !(k21 >= 0.0))
    throw ValidationError("chemo.pk.k12 and chemo.pk.k21 must be >= 0");
}

void ChemoProtocol::validate() const {
  schedule.validate();
  pk.validate();
  if (!(gamma >= 0.0)) throw ValidationError("chemo.gamma must be >= 0");
  if (!(x_bar >= 0.0)) throw ValidationError("chemo.x_bar must be >= 0");
}

void RadioProtocol::validate() const {
  if (!(dose >= 0.0) || !(alpha_eff >= 0.0) || !(gamma_r >= 0.0))
    throw ValidationError("radio.dose, radio.alpha_eff and radio.gamma_r must be >= 0");
  if (!(x_hat >= 1.0)) throw ValidationError("radio.x_hat must be >= 1");
  if (session_times.empty()) return;
  if (!(epsilon > 0.0)) throw ValidationError("radio.epsilon must be > 0 when sessions exist");
  for (std::size_t i = 1; i < session_times.size(); ++i)
    if (!(session_times[i] - session_times[i - 1] > 2.0 * epsilon))
      throw ValidationError("radio sessions overlap: sessions " + std::to_string(i - 1) +
                            " and " + std::to_string(i) + " are closer than 2*epsilon");
}

double infusion_rate(const InfusionSchedule& s, double t) {
  if (s.times.size() < 2 || t < s.times.front() || t >= s.times.back()) return 0.0;
  const auto it = std::upper_bound(s.times.begin(), s.times.end(), t);
  const auto i = static_cast<std::size_t>(it - s.times.begin()) - 1;
  return s.doses[i] / (s.times[i + 1] - s.times[i]);
}

namespace {

// Scalar affine ODE c' = -k c + r over tau, exact.
double relax(double c, double k, double r, double tau) {
  // c e^{-k tau} + r (1 - e^{-k tau}) / k
  const double decay = std::exp(-k * tau);
  return c * decay - r * std::expm1(-k * tau) / k;
}

}  // namespace

PkState pk_advance(const PkParams& pk, const PkState& s, double rate, double tau) {
  if (tau == 0.0) return s;
  const double r = rate / pk.volume;
  const double k11 = pk.k_e + pk.k12;
  if (pk.k21 == 0.0) {
    // Peripheral compartment frozen; central is a scalar relaxation.
    return {relax(s.c1, k11, r + pk.k12 * s.c2, tau), s.c2};
  }
  // A = [[-(k_e+k12), k12], [k21, -k21]], invertible, steady state (r/k_e, r/k_e).
  // exp(A tau) = p0 I + p1 (A - mu I) with mu the mean eigenvalue and
  // p1 the divided difference of exp over the two real eigenvalues.
  const double mu = -0.5 * (k11 + pk.k21);
  const double det = pk.k_e * pk.k21;
  const double q = std::sqrt(std::max(0.0, mu * mu - det));
  const double lam1 = mu + q;  // slow
  double p0 = 0.0;
  double p1 = 0.0;
  if (q * tau > 1.0) {
    const double e1 = std::exp(lam1 * tau);
    const double ratio = std::exp(-2.0 * q * tau);
    p0 = 0.5 * e1 * (1.0 + ratio);
    p1 = -e1 * std::expm1(-2.0 * q * tau) / (2.0 * q);
  } else {
    const double em = std::exp(mu * tau);
    p0 = em * std::cosh(q * tau);
    p1 = q > 0.0 ? em * std::sinh(q * tau) / q : em * tau;
  }
  const double ss = r / pk.k_e;
  const double d1 = s.c1 - ss;
  const double d2 = s.c2 - ss;
  // (A - mu I) d
  const double a1 = (-k11 - mu) * d1 + pk.k12 * d2;
  const double a2 = pk.k21 * d1 + (-pk.k21 - mu) * d2;
  return {ss + p0 * d1 + p1 * a1, ss + p0 * d2 + p1 * a2};
}

std::vector<PkState> pk_solve(const ChemoProtocol& proto, std::span<const double> grid) {
  const auto& times = proto.schedule.times;
  if (grid.empty()) return {};
  if (grid.front() != times.front())
    throw ValidationError("pk_solve: grid must start at the schedule start");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ValidationError("pk_solve: grid must be increasing");
  for (double bp : times) {
    if (bp <= grid.front() || bp > grid.back()) continue;
    if (!std::binary_search(grid.begin(), grid.end(), bp))
      throw SolverError("pk_solve: grid omits infusion breakpoint " + std::to_string(bp));
  }
  std::vector<PkState> out;
  out.reserve(grid.size());
  PkState state{};
  out.push_back(state);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    state = pk_advance(proto.pk, state, infusion_rate(proto.schedule, grid[i - 1]),
                       grid[i] - grid[i - 1]);
    out.push_back(state);
  }
  return out;
}

double radiation_kill(const RadioProtocol& proto, double t) {
  if (proto.session_times.empty() || proto.alpha_eff == 0.0) return 0.0;
  const auto it = std::lower_bound(proto.session_times.begin(), proto.session_times.end(),
                                   t - proto.epsilon);
  if (it == proto.session_times.end() || *it > t + proto.epsilon) return 0.0;
  return -std::expm1(-proto.alpha_eff * proto.dose / (2.0 * proto.epsilon));
}

double chemo_kill_profile(const ChemoProtocol& proto, double x, double smoothing) {
  return simd::kill_value({proto.gamma, proto.x_bar, smoothing}, x);
}

double radio_kill_profile(const RadioProtocol& proto, double x, double smoothing) {
  return simd::kill_value({proto.gamma_r, proto.x_hat, smoothing}, x);
}

std::vector<double> discontinuity_times(const ChemoProtocol* chemo, const RadioProtocol* radio) {
  std::vector<double> out;
  if (chemo) out.insert(out.end(), chemo->schedule.times.begin(), chemo->schedule.times.end());
  if (radio) {
    for (double c : radio->session_times) {
      out.push_back(c - radio->epsilon);
      out.push_back(c + radio->epsilon);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace metastat
