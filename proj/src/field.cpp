#include "metastat/field.hpp"

#include <algorithm>
#include <cmath>

#include "metastat/errors.hpp"

namespace metastat {

ConcentrationCurve::ConcentrationCurve(const ChemoProtocol& proto,
                                       std::span<const double> cache_times)
    : pk_(proto.pk), schedule_(proto.schedule) {
  const double start = schedule_.start();
  nodes_ = schedule_.times;
  for (double t : cache_times)
    if (t > start) nodes_.push_back(t);
  std::sort(nodes_.begin(), nodes_.end());
  nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
  states_ = pk_solve(proto, nodes_);
}

PkState ConcentrationCurve::state(double t) const {
  if (nodes_.empty() || t <= nodes_.front()) return {};
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  const auto i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  if (nodes_[i] == t) return states_[i];
  return pk_advance(pk_, states_[i], infusion_rate(schedule_, nodes_[i]), t - nodes_[i]);
}

double ConcentrationCurve::operator()(double t) const { return state(t).c1; }

GrowthField::GrowthField(GompertzParams growth, std::optional<ChemoProtocol> chemo,
                         std::optional<RadioProtocol> radio, TimeWindow window,
                         std::optional<double> smoothing, std::span<const double> cache_times)
    : growth_(growth),
      chemo_(std::move(chemo)),
      radio_(std::move(radio)),
      window_(window),
      log_b_(std::log(growth.b)) {
  growth_.validate();
  if (!(window_.end >= window_.start)) throw ValidationError("field window end < start");
  if (smoothing && !(*smoothing >= 0.0)) throw ValidationError("smoothing must be >= 0");
  if (chemo_) {
    chemo_->validate();
    chemo_delta_ = smoothing.value_or(default_smoothing(chemo_->x_bar));
    concentration_ = ConcentrationCurve(*chemo_, cache_times);
  }
  if (radio_) {
    radio_->validate();
    radio_delta_ = smoothing.value_or(default_smoothing(radio_->x_hat));
  }
  discontinuities_ = discontinuity_times(chemo_ ? &*chemo_ : nullptr, radio_ ? &*radio_ : nullptr);
}

GrowthField GrowthField::untreated(GompertzParams growth, TimeWindow window) {
  return GrowthField(growth, std::nullopt, std::nullopt, window);
}

double GrowthField::concentration(double t) const { return chemo_ ? concentration_(t) : 0.0; }

double GrowthField::radiation(double t) const { return radio_ ? radiation_kill(*radio_, t) : 0.0; }

simd::FieldSlice GrowthField::make_slice(double c, double r) const {
  simd::FieldSlice s;
  s.a = growth_.a;
  s.log_b = log_b_;
  if (chemo_) s.chemo = {chemo_->gamma * c, chemo_->x_bar, chemo_delta_};
  if (radio_) s.radio = {radio_->gamma_r * r, radio_->x_hat, radio_delta_};
  return s;
}

simd::FieldSlice GrowthField::slice(double t) const {
  return make_slice(concentration(t), radiation(t));
}

simd::FieldSlice GrowthField::slice_within(double t, double lo, double hi) const {
  return make_slice(concentration(t), radiation(0.5 * (lo + hi)));
}

double GrowthField::eval(double t, double x) const {
  if (!(x > 0.0)) throw DomainError("GrowthField::eval: x must be > 0");
  return simd::growth_rate(slice(t), x);
}

double GrowthField::eval_dx(double t, double x) const {
  if (!(x > 0.0)) throw DomainError("GrowthField::eval_dx: x must be > 0");
  return simd::growth_rate_dx(slice(t), x);
}

double GrowthField::eval_dxx(double t, double x) const {
  if (!(x > 0.0)) throw DomainError("GrowthField::eval_dxx: x must be > 0");
  return simd::growth_rate_dxx(slice(t), x);
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::BoundaryDegenerate: return "boundary-degenerate";
  }
  return "?";
}

bool HypothesisReport::ok() const {
  return std::none_of(checks.begin(), checks.end(),
                      [](const HypothesisCheck& c) { return c.status == CheckStatus::Fail; });
}

const HypothesisCheck* HypothesisReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

std::vector<double> sample_times(const GrowthField& f, double t0, double t_end, std::size_t n) {
  std::vector<double> ts;
  for (std::size_t i = 0; i < n; ++i)
    ts.push_back(t0 + (t_end - t0) * static_cast<double>(i) / static_cast<double>(n - 1));
  const auto disc = f.discontinuities();
  for (std::size_t i = 0; i < disc.size(); ++i) {
    if (disc[i] >= t0 && disc[i] <= t_end) ts.push_back(disc[i]);
    if (i + 1 < disc.size()) {
      const double mid = 0.5 * (disc[i] + disc[i + 1]);
      if (mid >= t0 && mid <= t_end) ts.push_back(mid);
    }
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

}  // namespace

HypothesisReport validate_hypotheses(const GrowthField& f, double t0, double t_end,
                                     std::size_t samples) {
  if (samples < 2) throw ValidationError("validate_hypotheses: samples must be >= 2");
  const double b = f.growth().b;
  const auto ts = sample_times(f, t0, t_end, samples);
  HypothesisReport report;

  HypothesisCheck e1{"G(t,1) > 0", CheckStatus::Pass, {}, {}, {}};
  for (double t : ts) {
    const double g = f.eval(t, 1.0);
    if (!(g > 0.0)) {
      e1 = {e1.name, CheckStatus::Fail, t, 1.0, g};
      break;
    }
  }
  report.checks.push_back(e1);

  HypothesisCheck e2{"G(t0,x) > 0 on [1,b)", CheckStatus::Pass, {}, {}, {}};
  const double log_b = std::log(b);
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = std::exp(log_b * static_cast<double>(i) / static_cast<double>(samples));
    const double g = f.eval(t0, x);
    if (!(g > 0.0)) {
      e2 = {e2.name, CheckStatus::Fail, t0, x, g};
      break;
    }
  }
  report.checks.push_back(e2);

  HypothesisCheck e3{"G(t,b) < 0 on (t0,T]", CheckStatus::Pass, {}, {}, {}};
  for (double t : ts) {
    if (t <= t0) continue;
    const double g = f.eval(t, b);
    if (g > 0.0) {
      e3 = {e3.name, CheckStatus::Fail, t, b, g};
      break;
    }
    if (g == 0.0 && e3.status == CheckStatus::Pass)
      e3 = {e3.name, CheckStatus::BoundaryDegenerate, t, b, g};
  }
  report.checks.push_back(e3);

  HypothesisCheck e4{"G(.,1) constant", CheckStatus::Pass, {}, {}, {}};
  const double ref = f.eval(t0, 1.0);
  for (double t : ts) {
    const double g = f.eval(t, 1.0);
    if (std::abs(g - ref) > 1e-12 * std::abs(ref)) {
      e4 = {e4.name, CheckStatus::Fail, t, 1.0, g};
      break;
    }
  }
  report.checks.push_back(e4);
  return report;
}

}  // namespace metastat
