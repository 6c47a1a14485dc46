#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metastat/growth_model.hpp"
#include "metastat/simd/field_slice.hpp"
#include "metastat/treatment.hpp"

namespace metastat {

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const { return t >= start && t <= end; }
};

/// C(t) from a chemo protocol. States are cached at construction on the union
/// of the schedule breakpoints and caller-supplied instants; evaluation
/// re-advances the exact propagator from the nearest cached node at or before t.
class ConcentrationCurve {
 public:
  ConcentrationCurve() = default;
  ConcentrationCurve(const ChemoProtocol& proto, std::span<const double> cache_times);

  double operator()(double t) const;
  PkState state(double t) const;

 private:
  PkParams pk_{};
  InfusionSchedule schedule_{};
  std::vector<double> nodes_;
  std::vector<PkState> states_;
};

/// G(t, x) = g(x) - K_c(x) C(t) - K_r(x) R(t), immutable after construction.
class GrowthField {
 public:
  /// `smoothing` overrides the Heaviside blend width for both kill terms;
  /// otherwise each uses default_smoothing(threshold). `cache_times` are extra
  /// PK cache nodes (typically the scheme grid).
  GrowthField(GompertzParams growth, std::optional<ChemoProtocol> chemo,
              std::optional<RadioProtocol> radio, TimeWindow window,
              std::optional<double> smoothing = std::nullopt,
              std::span<const double> cache_times = {});

  /// Untreated field on `window`.
  static GrowthField untreated(GompertzParams growth, TimeWindow window);

  double eval(double t, double x) const;
  double eval_dx(double t, double x) const;
  double eval_dxx(double t, double x) const;

  /// The field frozen at t; R sampled at t itself.
  simd::FieldSlice slice(double t) const;
  /// The field at t as seen from inside the open interval (lo, hi): C at t,
  /// R at the interval midpoint. Used by steppers so no evaluation picks up a
  /// jump located at an interval end.
  simd::FieldSlice slice_within(double t, double lo, double hi) const;

  double concentration(double t) const;
  double radiation(double t) const;

  const GompertzParams& growth() const { return growth_; }
  const std::optional<ChemoProtocol>& chemo() const { return chemo_; }
  const std::optional<RadioProtocol>& radio() const { return radio_; }
  const TimeWindow& window() const { return window_; }
  double chemo_smoothing() const { return chemo_delta_; }
  double radio_smoothing() const { return radio_delta_; }
  bool untreated() const { return !chemo_ && !radio_; }

  /// Sorted instants where G may jump in t (Hypothesis H points).
  std::span<const double> discontinuities() const { return discontinuities_; }

 private:
  simd::FieldSlice make_slice(double c, double r) const;

  GompertzParams growth_;
  std::optional<ChemoProtocol> chemo_;
  std::optional<RadioProtocol> radio_;
  TimeWindow window_;
  double log_b_ = 0.0;
  double chemo_delta_ = 0.0;
  double radio_delta_ = 0.0;
  std::vector<double> discontinuities_;
  ConcentrationCurve concentration_;
};

enum class CheckStatus { Pass, Fail, BoundaryDegenerate };

const char* to_string(CheckStatus s);

struct HypothesisCheck {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  /// First violating (or degenerate) sample, when any.
  std::optional<double> t;
  std::optional<double> x;
  std::optional<double> value;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;

  bool ok() const;  // no Fail
  const HypothesisCheck* find(const std::string& name) const;
};

/// Samples G over [t0, T] x [1, b] and checks G(t,1) > 0, G(t0,x) > 0 on [1,b),
/// G(t,b) < 0 on (t0,T] and G(.,1) constant. Sample times include every
/// discontinuity and the midpoint between consecutive ones.
HypothesisReport validate_hypotheses(const GrowthField& f, double t0, double t_end,
                                     std::size_t samples);

}  // namespace metastat
