#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metastat/characteristics.hpp"
#include "metastat/field.hpp"
#include "metastat/growth_model.hpp"

namespace metastat {

/// Variable-step time grid: uniform nodes plus every discontinuity of G.
struct TimeGrid {
  std::vector<double> nodes;

  std::size_t size() const { return nodes.size(); }
  double operator[](std::size_t n) const { return nodes[n]; }
  /// k_n = t_{n+1} - t_n.
  double step(std::size_t n) const { return nodes[n + 1] - nodes[n]; }
};

/// Nodes start + i*base_step up to window.end (inclusive), with `disc` and
/// `extra` instants inside the window inserted. Instants closer than
/// 1e-9*max(1,|t|) to a uniform node replace it.
TimeGrid build_time_grid(TimeWindow window, double base_step, std::span<const double> disc,
                         std::span<const double> extra = {});

/// u(t_start, .) on [1, b].
class InitialDensity {
 public:
  static InitialDensity zero();
  static InitialDensity function(std::function<double(double)> u0);
  /// Piecewise linear through (x[i], u[i]), zero outside.
  static InitialDensity sampled(std::vector<double> x, std::vector<double> u);

  double operator()(double x) const;
  bool is_zero() const { return !fn_; }

 private:
  std::function<double(double)> fn_;
};

/// One row of the characteristic mesh. Entries [0, triangular) were emitted
/// from x = 1 (entry 0 at this row's time, entry triangular-1 at the first
/// grid node); entries after that follow the initial data.
struct MeshRow {
  double t = 0.0;
  std::size_t triangular = 0;
  std::vector<double> x;
  std::vector<double> u;

  std::size_t size() const { return x.size(); }
};

enum class BoundaryQuadrature {
  /// First cell weighted h_2 beta_2 u_2 (full weight), trapezoid above.
  Paper,
  /// First cell weighted h_2 beta_2 u_2 / 2.
  PureTrapezoid,
};

enum class DiagonalRule {
  /// u = 0 on the oldest boundary-emitted characteristic.
  Zero,
  /// Carry the density of the first row along it like every other entry.
  Propagate,
};

struct SchemeOptions {
  BoundaryQuadrature quadrature = BoundaryQuadrature::Paper;
  DiagonalRule diagonal = DiagonalRule::Zero;
  /// Cells narrower than merge_tolerance*x are collapsed to zero width.
  double merge_tolerance = 1e-14;
};

/// Abscissae of row n from row n-1: x_1 = 1, x_i = Phi_{(t_{n-1}, x_{i-1})}(t_n).
/// The density of the returned row is left empty. Throws SolverError if the
/// new abscissae are not monotone.
MeshRow advance_mesh(const GrowthField& f, const TimeGrid& grid, std::size_t n,
                     const MeshRow& prev, const FlowSolverConfig& cfg,
                     const SchemeOptions& opts = {});

/// exp(-(k/2)(dG/dx(t_n, x_new) + dG/dx(t_{n-1}, x_prev))).
double survival_factor(const GrowthField& f, double t_prev, double t_n, double x_prev,
                       double x_new);

/// Quadrature of the nonlocal boundary term over entries 1.. of a row.
double boundary_quadrature(const ColonizationLaw& law, const MeshRow& row,
                           BoundaryQuadrature variant = BoundaryQuadrature::Paper);

/// Fills row.u for time node n given the previous row and y_p(t_n). Throws
/// SolverError if G(t_n, 1) <= 0.
void step_density(const GrowthField& f, const ColonizationLaw& law, const TimeGrid& grid,
                  std::size_t n, const MeshRow& prev, MeshRow& row, double primary_size,
                  const SchemeOptions& opts = {});

struct CompatibilityReport {
  double u0_at_b = 0.0;
  double flux_lhs = 0.0;  // G(t0,1) u0(1)
  double flux_rhs = 0.0;  // int beta u0 + f(t0)
  double tolerance = 0.0;
  bool boundary_ok = true;
  bool flux_ok = true;

  bool compatible() const { return boundary_ok && flux_ok; }
};

/// Checks u0(b) = 0 and G(t0,1) u0(1) = int_1^b beta u0 + f(t0). The integral
/// uses the trapezoid rule on `samples` log-spaced points.
CompatibilityReport check_compatibility(const GrowthField& f, const ColonizationLaw& law,
                                        const InitialDensity& u0, double t0, double f_t0,
                                        std::size_t samples = 4096, double rel_tol = 1e-6);

struct SimulationConfig {
  TimeWindow window;            // [start, horizon]
  double treatment_start = 0.0; // t0
  double base_step = 0.25;      // days
  FlowSolverConfig flow;        // RK4 substep bound and event tolerance
  SchemeOptions scheme;
  PrimaryMode primary_mode = PrimaryMode::Continuous;
  std::vector<double> b_min{1.0, 1e8};
  std::vector<double> snapshot_times;
  std::size_t max_steps = 200000;
  std::size_t hypothesis_samples = 257;
  /// Keep every row (tests and small runs only: memory grows as N^2/2).
  bool keep_rows = false;

  void validate() const;
};

struct InvariantStats {
  double min_u = 0.0;
  double max_abs_diagonal = 0.0;  // |u| on the zeroed diagonal
  bool monotone = true;
  std::size_t merged_cells = 0;
  std::size_t max_row_length = 0;
};

struct AprioriReport {
  bool holds = true;
  std::optional<double> first_violation_t;
  double max_ratio = 0.0;  // max ||u||_1 / bound
};

struct SimulationResult {
  std::vector<double> times;
  std::vector<double> primary;  // y_p at each node
  std::vector<double> source;   // f = beta(y_p) at each node
  std::vector<double> b_min;
  std::vector<std::vector<double>> mi;  // mi[k][n] for b_min[k]
  std::vector<double> l1;               // discrete L1 norm per node
  std::vector<MeshRow> snapshots;
  std::vector<MeshRow> rows;  // when keep_rows
  HypothesisReport hypotheses;
  CompatibilityReport compatibility;
  InvariantStats invariants;
  AprioriReport apriori;
  double u0_l1 = 0.0;  // discrete L1 norm of the first row
  std::string kernel;
};

SimulationResult run_simulation(const GrowthField& f, const ColonizationLaw& law,
                                const InitialDensity& u0, const SimulationConfig& cfg);

}  // namespace metastat
