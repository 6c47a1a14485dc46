#include "metastat/metrics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <charconv>
#include <cmath>
#include <limits>

#include "metastat/errors.hpp"
#include "metastat/simd/kernels.hpp"

namespace metastat {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double MetastaticIndexSeries::at(double t) const {
  if (times.empty()) throw DomainError("empty MI series");
  const double eps = 1e-9 * std::max(1.0, std::abs(t));
  if (t < times.front() - eps || t > times.back() + eps)
    throw DomainError("MI series has no value at t = " + format_double(t));
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end()) return values.back();
  const auto j = static_cast<std::size_t>(it - times.begin());
  if (*it == t || j == 0) return values[j];
  const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
  return values[j - 1] + w * (values[j] - values[j - 1]);
}

double metastatic_index(std::span<const double> x, std::span<const double> u, double b_min) {
  if (x.size() < 2) return 0.0;
  const auto& kt = simd::kernels();
  const double lower = std::max(b_min, 1.0);
  const auto it = std::lower_bound(x.begin(), x.end(), lower);
  if (it == x.end()) return 0.0;
  const auto j = static_cast<std::size_t>(it - x.begin());
  const double tail = kt.trapezoid(x.subspan(j), u.subspan(j));
  if (j == 0) return tail;
  const double w = (lower - x[j - 1]) / (x[j] - x[j - 1]);
  const double u_lower = u[j - 1] + w * (u[j] - u[j - 1]);
  return tail + 0.5 * (x[j] - lower) * (u_lower + u[j]);
}

double metastatic_index(const MeshRow& row, double b_min) {
  return metastatic_index(row.x, row.u, b_min);
}

MetastaticIndexSeries mi_series(const SimulationResult& r, std::size_t k) {
  if (k >= r.b_min.size()) throw DomainError("mi_series: threshold index out of range");
  return {r.times, r.mi[k], r.b_min[k]};
}

MetastaticIndexSeries mi_series_for(const SimulationResult& r, double b_min) {
  for (std::size_t k = 0; k < r.b_min.size(); ++k)
    if (r.b_min[k] == b_min) return mi_series(r, k);
  throw ValidationError("result has no MI series for b_min = " + format_double(b_min));
}

const char* to_string(OracleKind k) {
  return k == OracleKind::NoTreatment ? "no-treatment" : "chemo-only";
}

void ReferenceConfig::validate() const {
  if (refinement < 1) throw ValidationError("refinement must be >= 1");
  if (!(base_step > 0.0)) throw ValidationError("reference base_step must be > 0");
}

namespace {

constexpr std::size_t kInitialSamples = 2049;

}  // namespace

ReferenceSolution::ReferenceSolution(const GrowthField& f, const ColonizationLaw& law,
                                     const InitialDensity& u0, const ReferenceConfig& cfg)
    : growth_(f.growth()), law_(law), u0_(u0), cfg_(cfg), field_(&f) {
  cfg_.validate();
  law_.validate();
  if (cfg_.oracle == OracleKind::NoTreatment) {
    if (!f.untreated()) throw ValidationError("no-treatment oracle needs an untreated field");
  } else {
    if (!f.chemo() || f.radio())
      throw ValidationError("chemo-only oracle needs a chemo protocol and no radiotherapy");
    if (f.chemo()->x_bar + f.chemo_smoothing() > 1.0)
      throw ValidationError("chemo-only oracle needs K(x) = x on [1, b] (x_bar + smoothing <= 1)");
    gamma_ = f.chemo()->gamma;
  }
  const auto& win = f.window();
  t_start_ = win.start;
  log_b_ = std::log(growth_.b);
  if (cfg_.treatment_start < win.start || cfg_.treatment_start > win.end)
    throw ValidationError("reference treatment start outside the field window");

  const double span = win.end - win.start;
  const auto cells = static_cast<std::size_t>(
      std::max(1.0, std::ceil(span * static_cast<double>(cfg_.refinement) / cfg_.base_step - 1e-9)));
  step_ = span / static_cast<double>(cells);
  grid_.resize(cells + 1);
  for (std::size_t j = 0; j <= cells; ++j) grid_[j] = t_start_ + static_cast<double>(j) * step_;
  grid_.back() = win.end;

  const double a = growth_.a;
  i_.assign(grid_.size(), 0.0);
  if (gamma_ != 0.0) {
    for (std::size_t j = 1; j < grid_.size(); ++j) {
      double acc = 0.0;
      double lo = grid_[j - 1];
      auto integrand = [&](double tau) { return f.concentration(tau) * std::exp(a * tau); };
      auto piece = [&](double p, double q) {
        return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, p, q, 8,
                                                                              1e-13);
      };
      for (double d : f.discontinuities()) {
        if (d > lo && d < grid_[j]) {
          acc += piece(lo, d);
          lo = d;
        }
      }
      acc += piece(lo, grid_[j]);
      i_[j] = i_[j - 1] + acc;
    }
  }
  d_.resize(grid_.size());
  for (std::size_t j = 0; j < grid_.size(); ++j)
    d_[j] = -log_b_ * std::exp(a * grid_[j]) + gamma_ * i_[j];

  const double t0 = cfg_.treatment_start;
  log_seed_ = cfg_.primary_mode == PrimaryMode::Continuous ? log_b_ * -std::expm1(-a * t0) : 0.0;
  const double i_t0 = integral_i(t0);
  auto log_primary = [&](std::size_t j) {
    const double s = grid_[j];
    if (s <= t0) return log_b_ * -std::expm1(-a * s);
    return log_b_ + (log_seed_ - log_b_) * std::exp(-a * (s - t0)) -
           gamma_ * std::exp(-a * s) * (i_[j] - i_t0);
  };

  // Source: primary seeding plus emission from the initial population.
  const double log_m = law_.m > 0.0 ? std::log(law_.m) : -std::numeric_limits<double>::infinity();
  const double alpha = law_.alpha;
  std::vector<double> source(grid_.size());
  for (std::size_t j = 0; j < grid_.size(); ++j)
    source[j] = law_.m * std::exp(alpha * log_primary(j));

  const auto& kt = simd::kernels();
  if (!u0_.is_zero() && law_.m > 0.0) {
    std::vector<double> ly(kInitialSamples);
    std::vector<double> w(kInitialSamples, 0.0);
    std::vector<double> y(kInitialSamples);
    for (std::size_t k = 0; k < kInitialSamples; ++k) {
      ly[k] = log_b_ * static_cast<double>(k) / static_cast<double>(kInitialSamples - 1);
      y[k] = k + 1 == kInitialSamples ? growth_.b : std::exp(ly[k]);
    }
    for (std::size_t k = 0; k < kInitialSamples; ++k) {
      const double left = k > 0 ? y[k] - y[k - 1] : 0.0;
      const double right = k + 1 < kInitialSamples ? y[k + 1] - y[k] : 0.0;
      w[k] = 0.5 * (left + right) * u0_(y[k]);
    }
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const double s = grid_[j];
      const double decay = std::exp(-a * (s - t_start_));
      const double c0 = log_m + alpha * (log_b_ * (1.0 - decay) - gamma_ * std::exp(-a * s) * i_[j]);
      source[j] += kt.exp_affine_dot(c0, alpha * decay, ly, w);
    }
  }

  // Trapezoid renewal solve; the diagonal kernel value is beta(1) = m.
  births_.assign(grid_.size(), 0.0);
  std::vector<double> w(grid_.size(), 0.0);
  const double denom = 1.0 - 0.5 * step_ * law_.m;
  if (!(denom > 0.0)) throw SolverError("reference grid too coarse for the renewal solve");
  for (std::size_t j = 0; j < grid_.size(); ++j) {
    double conv = 0.0;
    if (j > 0 && law_.m > 0.0) {
      const double e = std::exp(-a * grid_[j]);
      const double c0 = log_m + alpha * (log_b_ - gamma_ * e * i_[j]);
      conv = kt.exp_affine_dot(c0, alpha * e, std::span<const double>(d_.data(), j),
                               std::span<const double>(w.data(), j));
    }
    births_[j] = j == 0 ? source[0] : (source[j] + step_ * conv) / denom;
    w[j] = j == 0 ? 0.5 * births_[j] : births_[j];
  }
  cum_.assign(grid_.size(), 0.0);
  for (std::size_t j = 1; j < grid_.size(); ++j)
    cum_[j] = cum_[j - 1] + 0.5 * step_ * (births_[j - 1] + births_[j]);
}

double ReferenceSolution::integral_i(double t) const {
  if (gamma_ == 0.0) return 0.0;
  if (t <= grid_.front()) return 0.0;
  if (t >= grid_.back()) return i_.back();
  const auto j = static_cast<std::size_t>(
      std::upper_bound(grid_.begin(), grid_.end(), t) - grid_.begin() - 1);
  if (grid_[j] == t) return i_[j];
  const double a = growth_.a;
  auto integrand = [&](double tau) { return field_->concentration(tau) * std::exp(a * tau); };
  double lo = grid_[j];
  double acc = 0.0;
  for (double d : field_->discontinuities()) {
    if (d > lo && d < t) {
      acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, lo, d, 8,
                                                                            1e-13);
      lo = d;
    }
  }
  acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, lo, t, 8, 1e-13);
  return i_[j] + acc;
}

double ReferenceSolution::d_at(double sigma) const {
  return -log_b_ * std::exp(growth_.a * sigma) + gamma_ * integral_i(sigma);
}

double ReferenceSolution::log_flow(double s, double x, double t) const {
  const double a = growth_.a;
  return log_b_ + (std::log(x) - log_b_) * std::exp(-a * (t - s)) -
         gamma_ * std::exp(-a * t) * (integral_i(t) - integral_i(s));
}

namespace {

double interp(std::span<const double> grid, std::span<const double> v, double step, double t) {
  if (t <= grid.front()) return v.front();
  if (t >= grid.back()) return v.back();
  auto j = static_cast<std::size_t>((t - grid.front()) / step);
  j = std::min(j, grid.size() - 2);
  while (j > 0 && grid[j] > t) --j;
  while (j + 2 < grid.size() && grid[j + 1] < t) ++j;
  const double w = (t - grid[j]) / (grid[j + 1] - grid[j]);
  return v[j] + w * (v[j + 1] - v[j]);
}

}  // namespace

double ReferenceSolution::birth_rate(double s) const { return interp(grid_, births_, step_, s); }

double ReferenceSolution::g_boundary(double s) const {
  return growth_.a * log_b_ - gamma_ * field_->concentration(s);
}

double ReferenceSolution::boundary_density(double s) const {
  return birth_rate(s) / g_boundary(s);
}

double ReferenceSolution::cumulative_births(double sigma) const {
  if (sigma <= grid_.front()) return 0.0;
  if (sigma >= grid_.back()) return cum_.back();
  auto j = static_cast<std::size_t>((sigma - grid_.front()) / step_);
  j = std::min(j, grid_.size() - 2);
  while (j > 0 && grid_[j] > sigma) --j;
  while (j + 2 < grid_.size() && grid_[j + 1] < sigma) ++j;
  return cum_[j] + 0.5 * (sigma - grid_[j]) * (births_[j] + birth_rate(sigma));
}

double ReferenceSolution::entry_time(double t, double x) const {
  // ln Phi_{(sigma,1)}(t) = c(t) + e^{-at} d(sigma), d decreasing in sigma.
  const double a = growth_.a;
  const double target = (std::log(x) - log_b_ + gamma_ * std::exp(-a * t) * integral_i(t)) *
                        std::exp(a * t);
  if (target <= d_at(t)) return t;
  if (target >= d_at(t_start_)) return t_start_;
  double lo = t_start_;
  double hi = t;
  // Bracket on the grid first, then bisect on the exact d.
  const auto top = static_cast<std::size_t>(
      std::upper_bound(grid_.begin(), grid_.end(), t) - grid_.begin());
  const auto it = std::lower_bound(d_.begin(), d_.begin() + static_cast<std::ptrdiff_t>(top),
                                   target, [](double dv, double v) { return dv > v; });
  const auto k = static_cast<std::size_t>(it - d_.begin());
  if (k > 0) lo = grid_[k - 1];
  if (k < top) hi = std::min(t, grid_[k]);
  for (int iter = 0; iter < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (d_at(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double ReferenceSolution::density(double t, double x) const {
  if (!(x >= 1.0) || x > growth_.b) throw DomainError("reference_density: x outside [1, b]");
  if (t < t_start_ || t > grid_.back()) throw DomainError("reference_density: t outside window");
  const double lx = std::log(x);
  const double oldest = log_flow(t_start_, 1.0, t);
  const double a = growth_.a;
  if (lx < oldest) {
    const double sigma = entry_time(t, x);
    return boundary_density(sigma) * std::exp(a * (t - sigma)) / x;
  }
  const double top = log_flow(t_start_, growth_.b, t);
  if (lx > top) return 0.0;
  if (u0_.is_zero()) return 0.0;
  // Omega2: invert the affine map in ln y.
  const double e = std::exp(a * (t - t_start_));
  const double ly = log_b_ + (lx - log_b_ + gamma_ * std::exp(-a * t) * integral_i(t)) * e;
  const double y = std::clamp(std::exp(ly), 1.0, growth_.b);
  return u0_(y) * y * e / x;
}

double ReferenceSolution::metastatic_index(double t, double b_min) const {
  if (t < t_start_ || t > grid_.back()) throw DomainError("reference MI: t outside window");
  const double lower = std::max(b_min, 1.0);
  double mi = cumulative_births(entry_time(t, lower));
  if (!u0_.is_zero()) {
    const double a = growth_.a;
    const double e = std::exp(a * (t - t_start_));
    const double ly = std::max(
        0.0, log_b_ + (std::log(lower) - log_b_ + gamma_ * std::exp(-a * t) * integral_i(t)) * e);
    if (ly < log_b_) {
      auto integrand = [&](double v) {
        const double y = std::exp(v);
        return u0_(y) * y;
      };
      mi += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, ly, log_b_,
                                                                           15, 1e-12);
    }
  }
  return mi;
}

MetastaticIndexSeries ReferenceSolution::mi_series(std::span<const double> times,
                                                   double b_min) const {
  MetastaticIndexSeries s;
  s.b_min = b_min;
  s.times.assign(times.begin(), times.end());
  s.values.reserve(times.size());
  for (double t : times) s.values.push_back(metastatic_index(t, b_min));
  return s;
}

double gompertz_survival_exponent(const GompertzParams& g, double x_s, double s, double t) {
  return std::log(g.b / x_s) * -std::expm1(-g.a * (t - s)) - g.a * (t - s);
}

double ErrorSeries::max() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

double ErrorSeries::at(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end() || *it != t)
    throw DomainError("error series has no node at t = " + format_double(t));
  return values[static_cast<std::size_t>(it - times.begin())];
}

ErrorSeries error_series(const MetastaticIndexSeries& test, const MetastaticIndexSeries& ref,
                         double floor) {
  if (test.times.size() != test.values.size() || ref.times.size() != ref.values.size())
    throw ValidationError("error_series: malformed series");
  if (test.times.empty() || ref.times.empty()) throw ValidationError("error_series: empty series");
  const double eps = 1e-9 * std::max(1.0, std::abs(ref.times.back()));
  if (test.times.front() < ref.times.front() - eps || test.times.back() > ref.times.back() + eps)
    throw ValidationError("error_series: test window not covered by the reference");
  ErrorSeries out;
  out.times = test.times;
  out.values.reserve(test.times.size());
  for (std::size_t n = 0; n < test.times.size(); ++n) {
    const double r = ref.at(test.times[n]);
    out.values.push_back(std::abs(test.values[n] - r) / std::max(std::abs(r), floor));
  }
  return out;
}

AprioriReport apriori_bound_check(const SimulationResult& r, const ColonizationLaw& law,
                                  double b) {
  AprioriReport rep;
  if (r.times.empty()) return rep;
  const double rate = colonization_rate(law, b);
  double source_int = 0.0;
  for (std::size_t n = 0; n < r.times.size(); ++n) {
    if (n > 0)
      source_int += 0.5 * (r.times[n] - r.times[n - 1]) * (r.source[n] + r.source[n - 1]);
    const double bound = std::exp(rate * (r.times[n] - r.times.front())) * (source_int + r.u0_l1);
    const double norm = r.l1[n];
    if (bound > 0.0) rep.max_ratio = std::max(rep.max_ratio, norm / bound);
    if (norm > bound) {
      rep.holds = false;
      if (!rep.first_violation_t) rep.first_violation_t = r.times[n];
      if (bound == 0.0) rep.max_ratio = std::numeric_limits<double>::infinity();
    }
  }
  return rep;
}

namespace {

double ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace

ComparisonReport comparison_report(
    const std::vector<std::pair<std::string, const SimulationResult*>>& runs,
    std::vector<double> instants) {
  ComparisonReport rep;
  rep.instants = std::move(instants);
  if (runs.empty()) return rep;
  const auto& base = *runs.front().second;
  std::vector<std::pair<MetastaticIndexSeries, MetastaticIndexSeries>> series;
  for (const auto& [name, res] : runs) {
    if (res->b_min.size() < 2)
      throw ValidationError("comparison_report: run '" + name + "' needs two MI thresholds");
    if (res->times.front() != base.times.front() || res->times.back() != base.times.back())
      throw ValidationError("comparison_report: run '" + name + "' covers a different window");
    series.emplace_back(mi_series(*res, 0), mi_series(*res, 1));
    ComparisonRow row{name, {}, {}};
    for (double t : rep.instants) {
      row.total.push_back(series.back().first.at(t));
      row.detectable.push_back(series.back().second.at(t));
    }
    rep.rows.push_back(std::move(row));
  }
  // Ratios on the baseline grid; other runs are interpolated onto it.
  rep.ratio_times = base.times;
  for (std::size_t j = 1; j < runs.size(); ++j) {
    std::vector<double> rt;
    std::vector<double> rd;
    for (std::size_t n = 0; n < base.times.size(); ++n) {
      const double t = base.times[n];
      rt.push_back(ratio(series[j].first.at(t), series[0].first.values[n]));
      rd.push_back(ratio(series[j].second.at(t), series[0].second.values[n]));
    }
    rep.ratio_total.push_back(std::move(rt));
    rep.ratio_detectable.push_back(std::move(rd));
  }
  return rep;
}

std::string ComparisonReport::table_csv() const {
  std::string out = "scenario,index";
  for (double t : instants) out += ",t=" + format_double(t);
  out += '\n';
  for (const auto& row : rows) {
    for (const auto* kind : {"total", "detectable"}) {
      const auto& v = std::string(kind) == "total" ? row.total : row.detectable;
      out += row.name + ',' + kind;
      for (double x : v) out += ',' + format_double(x);
      out += '\n';
    }
  }
  return out;
}

std::string ComparisonReport::ratio_csv() const {
  std::string out = "t";
  for (std::size_t j = 1; j < rows.size(); ++j)
    out += ',' + rows[j].name + "_total," + rows[j].name + "_detectable";
  out += '\n';
  for (std::size_t n = 0; n < ratio_times.size(); ++n) {
    out += format_double(ratio_times[n]);
    for (std::size_t j = 0; j < ratio_total.size(); ++j)
      out += ',' + format_double(ratio_total[j][n]) + ',' + format_double(ratio_detectable[j][n]);
    out += '\n';
  }
  return out;
}

}  // namespace metastat
