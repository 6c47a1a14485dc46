#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metastat/transport.hpp"

namespace metastat {

/// Detectable-size threshold used by default (cells).
inline constexpr double kDetectableSize = 1e8;

struct MetastaticIndexSeries {
  std::vector<double> times;
  std::vector<double> values;
  double b_min = 1.0;

  /// Linear interpolation; throws DomainError outside [times.front(), times.back()].
  double at(double t) const;
};

/// Trapezoid of u over [max(b_min, 1), x.back()] on the row abscissae; the cell
/// containing b_min is split with u interpolated linearly.
double metastatic_index(std::span<const double> x, std::span<const double> u, double b_min);
double metastatic_index(const MeshRow& row, double b_min);

/// Series k of a simulation result (b_min = result.b_min[k]).
MetastaticIndexSeries mi_series(const SimulationResult& r, std::size_t k);
/// Series for an exact threshold present in result.b_min; throws otherwise.
MetastaticIndexSeries mi_series_for(const SimulationResult& r, double b_min);

enum class OracleKind { NoTreatment, ChemoOnly };

const char* to_string(OracleKind k);

struct ReferenceConfig {
  OracleKind oracle = OracleKind::NoTreatment;
  /// The reference grid step is base_step / refinement.
  std::size_t refinement = 4;
  double base_step = 0.25;
  /// Treatment start t0 (where the continuous primary leaves the closed form).
  double treatment_start = 0.0;
  PrimaryMode primary_mode = PrimaryMode::Continuous;

  void validate() const;
};

/// Semi-analytic solution on the field window: exact characteristics of
/// G = g(x) - gamma C(t) x (gamma = 0 without treatment) and the birth rate
/// B = (G u)(., 1) from the renewal equation
///   B(s) = f(s) + int_1^b beta(Phi_{(t_start,y)}(s)) u0(y) dy
///               + int_{t_start}^s beta(Phi_{(sigma,1)}(s)) B(sigma) dsigma
/// solved by the trapezoid rule on the fine grid.
class ReferenceSolution {
 public:
  ReferenceSolution(const GrowthField& f, const ColonizationLaw& law, const InitialDensity& u0,
                    const ReferenceConfig& cfg);

  /// ln Phi_{(s,x)}(t), closed form.
  double log_flow(double s, double x, double t) const;
  double birth_rate(double s) const;
  /// u(s, 1) = B(s) / G(s, 1).
  double boundary_density(double s) const;
  double density(double t, double x) const;
  double metastatic_index(double t, double b_min) const;
  MetastaticIndexSeries mi_series(std::span<const double> times, double b_min) const;

  std::span<const double> grid() const { return grid_; }
  std::span<const double> births() const { return births_; }

 private:
  double integral_i(double t) const;  // int_{t_start}^t C e^{a tau} dtau
  double d_at(double sigma) const;    // -ln b e^{a sigma} + gamma I(sigma)
  double cumulative_births(double sigma) const;
  /// Birth time of the Omega1 characteristic through (t, x), or t_start if x
  /// lies above the oldest one.
  double entry_time(double t, double x) const;
  double g_boundary(double s) const;

  GompertzParams growth_;
  ColonizationLaw law_;
  InitialDensity u0_;
  ReferenceConfig cfg_;
  const GrowthField* field_;
  double gamma_ = 0.0;
  double t_start_ = 0.0;
  double log_b_ = 0.0;
  double log_seed_ = 0.0;  // ln y_p(t0)
  double step_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> i_;       // I at grid nodes
  std::vector<double> d_;       // d at grid nodes
  std::vector<double> births_;  // B at grid nodes
  std::vector<double> cum_;     // int B at grid nodes
};

/// int_s^t (a ln(b/Phi) - a) dtau along the untreated flow started at x_s = Phi(s).
double gompertz_survival_exponent(const GompertzParams& g, double x_s, double s, double t);

struct ErrorSeries {
  std::vector<double> times;
  std::vector<double> values;

  double max() const;
  double at(double t) const;  // value at an exact node time
};

/// |test - ref| / max(|ref|, floor) at each test instant; ref is interpolated
/// linearly. Throws ValidationError if the test window is not inside ref's.
ErrorSeries error_series(const MetastaticIndexSeries& test, const MetastaticIndexSeries& ref,
                         double floor = 1e-30);

/// ||u(t_n)||_1 <= exp(beta(b)(t_n - t_start)) (int_{t_start}^{t_n} f + ||u0||_1) at
/// every node, using the discrete norms in the result.
AprioriReport apriori_bound_check(const SimulationResult& r, const ColonizationLaw& law, double b);

struct ComparisonRow {
  std::string name;
  std::vector<double> total;       // b_min[0] at each report instant
  std::vector<double> detectable;  // b_min[1]
};

struct ComparisonReport {
  std::vector<double> instants;
  std::vector<ComparisonRow> rows;
  std::vector<double> ratio_times;
  /// ratio_total[j][n]: total MI of run j+1 over run 0 at node n (1 when both
  /// vanish). Same layout for the detectable index.
  std::vector<std::vector<double>> ratio_total;
  std::vector<std::vector<double>> ratio_detectable;

  std::string table_csv() const;
  std::string ratio_csv() const;
};

/// The first run is the baseline for the ratio series; other runs are
/// interpolated onto its grid. Runs must cover the same window and carry at
/// least two MI thresholds (total, detectable).
ComparisonReport comparison_report(
    const std::vector<std::pair<std::string, const SimulationResult*>>& runs,
    std::vector<double> instants);

/// Shortest decimal form that round-trips.
std::string format_double(double v);

}  // namespace metastat
