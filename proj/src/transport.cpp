#include "metastat/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "metastat/errors.hpp"
#include "metastat/metrics.hpp"
#include "metastat/simd/kernels.hpp"

namespace metastat {

TimeGrid build_time_grid(TimeWindow window, double base_step, std::span<const double> disc,
                         std::span<const double> extra) {
  if (!(base_step > 0.0)) throw ValidationError("time step must be > 0");
  if (!(window.end > window.start)) throw ValidationError("time window must have end > start");
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a));
  };

  TimeGrid grid;
  const double span = window.end - window.start;
  const auto n = static_cast<std::size_t>(std::ceil(span / base_step - 1e-9));
  grid.nodes.reserve(n + 1 + disc.size() + extra.size());
  for (std::size_t i = 0; i < n; ++i)
    grid.nodes.push_back(window.start + static_cast<double>(i) * base_step);
  grid.nodes.push_back(window.end);

  std::vector<double> forced;
  for (auto list : {disc, extra})
    for (double d : list)
      if (d > window.start && d < window.end) forced.push_back(d);
  std::sort(forced.begin(), forced.end());

  for (double d : forced) {
    auto it = std::lower_bound(grid.nodes.begin(), grid.nodes.end(), d);
    if (it != grid.nodes.end() && close(*it, d)) {
      if (it != grid.nodes.begin() && it + 1 != grid.nodes.end()) *it = d;
      continue;
    }
    if (it != grid.nodes.begin() && close(*(it - 1), d)) {
      if (it - 1 != grid.nodes.begin()) *(it - 1) = d;
      continue;
    }
    grid.nodes.insert(it, d);
  }
  for (std::size_t i = 0; i + 1 < grid.nodes.size(); ++i)
    if (!(grid.step(i) > 0.0))
      throw ValidationError("time grid has a non-positive step at t = " +
                            std::to_string(grid.nodes[i]));
  return grid;
}

InitialDensity InitialDensity::zero() { return {}; }

InitialDensity InitialDensity::function(std::function<double(double)> u0) {
  InitialDensity d;
  d.fn_ = std::move(u0);
  return d;
}

InitialDensity InitialDensity::sampled(std::vector<double> x, std::vector<double> u) {
  if (x.size() != u.size() || x.size() < 2)
    throw ValidationError("sampled initial density needs >= 2 matching points");
  if (!std::is_sorted(x.begin(), x.end()))
    throw ValidationError("sampled initial density abscissae must be increasing");
  for (double v : u)
    if (!(v >= 0.0)) throw ValidationError("initial density must be >= 0");
  return function([x = std::move(x), u = std::move(u)](double y) {
    if (y < x.front() || y > x.back()) return 0.0;
    auto it = std::upper_bound(x.begin(), x.end(), y);
    if (it == x.end()) return u.back();
    const auto j = static_cast<std::size_t>(it - x.begin());
    const double w = (y - x[j - 1]) / (x[j] - x[j - 1]);
    return u[j - 1] + w * (u[j] - u[j - 1]);
  });
}

double InitialDensity::operator()(double x) const { return fn_ ? fn_(x) : 0.0; }

namespace {

std::size_t substeps(double k, const FlowSolverConfig& cfg) {
  return static_cast<std::size_t>(std::max(1.0, std::ceil(k / cfg.base_step - 1e-9)));
}

}  // namespace

MeshRow advance_mesh(const GrowthField& f, const TimeGrid& grid, std::size_t n,
                     const MeshRow& prev, const FlowSolverConfig& cfg, const SchemeOptions& opts) {
  if (n == 0 || n >= grid.size()) throw DomainError("advance_mesh: node index out of range");
  const auto& kt = simd::kernels();
  const double ta = grid[n - 1];
  const double tb = grid[n];

  MeshRow row;
  row.t = tb;
  row.triangular = prev.triangular + 1;
  row.x.resize(prev.size() + 1);
  row.x[0] = 1.0;
  std::copy(prev.x.begin(), prev.x.end(), row.x.begin() + 1);

  const std::size_t ns = substeps(tb - ta, cfg);
  const double h = (tb - ta) / static_cast<double>(ns);
  const std::span<double> moving(row.x.data() + 1, prev.size());
  for (std::size_t i = 0; i < ns; ++i) {
    const double t0 = ta + static_cast<double>(i) * h;
    const double t1 = i + 1 == ns ? tb : ta + static_cast<double>(i + 1) * h;
    kt.rk4_step(f.slice_within(t0, ta, tb), f.slice_within(t0 + 0.5 * (t1 - t0), ta, tb),
                f.slice_within(t1, ta, tb), t1 - t0, moving);
  }

  for (std::size_t j = 1; j < row.size(); ++j) {
    const double tol = opts.merge_tolerance * std::max(1.0, std::abs(row.x[j]));
    const double gap = row.x[j] - row.x[j - 1];
    if (gap < -tol) {
      throw SolverError("characteristics crossed at t = " + std::to_string(tb) + " (x[" +
                        std::to_string(j) + "] = " + std::to_string(row.x[j]) + ")");
    }
    if (gap < tol) row.x[j] = row.x[j - 1];
  }
  return row;
}

double survival_factor(const GrowthField& f, double t_prev, double t_n, double x_prev,
                       double x_new) {
  const double k = t_n - t_prev;
  const double dg_new = simd::growth_rate_dx(f.slice_within(t_n, t_prev, t_n), x_new);
  const double dg_old = simd::growth_rate_dx(f.slice_within(t_prev, t_prev, t_n), x_prev);
  return std::exp(-0.5 * k * (dg_new + dg_old));
}

namespace {

double quadrature_from(const simd::KernelTable& kt, std::span<const double> x,
                       std::span<const double> beta, std::span<const double> u,
                       BoundaryQuadrature variant) {
  if (x.size() < 2) return 0.0;
  const double first_weight = variant == BoundaryQuadrature::Paper ? 1.0 : 0.5;
  const double head = first_weight * (x[1] - x[0]) * beta[1] * u[1];
  return head + kt.product_trapezoid(x.subspan(1), beta.subspan(1), u.subspan(1));
}

}  // namespace

double boundary_quadrature(const ColonizationLaw& law, const MeshRow& row,
                           BoundaryQuadrature variant) {
  if (row.u.size() != row.x.size()) throw DomainError("boundary_quadrature: row has no density");
  const auto& kt = simd::kernels();
  std::vector<double> beta(row.size());
  kt.colonization(law.m, law.alpha, row.x, beta);
  return quadrature_from(kt, row.x, beta, row.u, variant);
}

void step_density(const GrowthField& f, const ColonizationLaw& law, const TimeGrid& grid,
                  std::size_t n, const MeshRow& prev, MeshRow& row, double primary_size,
                  const SchemeOptions& opts) {
  if (row.size() != prev.size() + 1) throw DomainError("step_density: row length mismatch");
  const auto& kt = simd::kernels();
  const double ta = grid[n - 1];
  const double tb = grid[n];
  const std::size_t m = prev.size();

  std::vector<double> dg_old(m);
  std::vector<double> dg_new(m);
  const std::span<const double> moved(row.x.data() + 1, m);
  kt.growth_dx(f.slice_within(ta, ta, tb), prev.x, dg_old);
  kt.growth_dx(f.slice_within(tb, ta, tb), moved, dg_new);

  row.u.resize(row.size());
  kt.propagate(prev.u, dg_old, dg_new, 0.5 * (tb - ta), std::span<double>(row.u.data() + 1, m));
  if (opts.diagonal == DiagonalRule::Zero) row.u[row.triangular - 1] = 0.0;

  std::vector<double> beta(row.size());
  kt.colonization(law.m, law.alpha, row.x, beta);
  const double q = quadrature_from(kt, row.x, beta, row.u, opts.quadrature);
  const double g1 = simd::growth_rate(f.slice_within(tb, ta, tb), 1.0);
  if (!(g1 > 0.0))
    throw SolverError("G(t, 1) <= 0 at t = " + std::to_string(tb) + "; boundary flux undefined");
  row.u[0] = (colonization_rate(law, primary_size) + q) / g1;
}

CompatibilityReport check_compatibility(const GrowthField& f, const ColonizationLaw& law,
                                        const InitialDensity& u0, double t0, double f_t0,
                                        std::size_t samples, double rel_tol) {
  CompatibilityReport rep;
  const double b = f.growth().b;
  rep.u0_at_b = u0(b);
  rep.boundary_ok = rep.u0_at_b == 0.0;

  const double g1 = f.eval(t0, 1.0);
  rep.flux_lhs = g1 * u0(1.0);
  double integral = 0.0;
  if (!u0.is_zero()) {
    samples = std::max<std::size_t>(samples, 2);
    std::vector<double> x(samples);
    std::vector<double> w(samples);
    const double lb = std::log(b);
    for (std::size_t i = 0; i < samples; ++i) {
      x[i] = i + 1 == samples ? b : std::exp(lb * static_cast<double>(i) /
                                             static_cast<double>(samples - 1));
      w[i] = colonization_rate(law, x[i]) * u0(x[i]);
    }
    integral = simd::kernels().trapezoid(x, w);
  }
  rep.flux_rhs = integral + f_t0;
  rep.tolerance = rel_tol * std::max(std::abs(rep.flux_lhs), std::abs(rep.flux_rhs));
  rep.flux_ok = std::abs(rep.flux_lhs - rep.flux_rhs) <= rep.tolerance;
  return rep;
}

void SimulationConfig::validate() const {
  if (!(window.end > window.start)) throw ValidationError("horizon must exceed the window start");
  if (!(window.start >= 0.0)) throw ValidationError("window start must be >= 0");
  if (!(base_step > 0.0)) throw ValidationError("time step must be > 0");
  if (treatment_start < window.start || treatment_start > window.end)
    throw ValidationError("treatment start must lie in the window");
  flow.validate();
  if (!(scheme.merge_tolerance >= 0.0)) throw ValidationError("merge tolerance must be >= 0");
  for (double v : b_min)
    if (!(v >= 1.0)) throw ValidationError("b_min thresholds must be >= 1");
  if (hypothesis_samples < 2) throw ValidationError("hypothesis_samples must be >= 2");
}

SimulationResult run_simulation(const GrowthField& f, const ColonizationLaw& law,
                                const InitialDensity& u0, const SimulationConfig& cfg) {
  cfg.validate();
  law.validate();
  const auto& kt = simd::kernels();
  const double b = f.growth().b;
  const double t_start = cfg.window.start;

  const TimeGrid grid = build_time_grid(cfg.window, cfg.base_step, f.discontinuities(),
                                        std::span<const double>(&cfg.treatment_start, 1));
  const std::size_t nodes = grid.size();
  if (nodes - 1 > cfg.max_steps) {
    throw ValidationError("time grid needs " + std::to_string(nodes - 1) +
                          " steps, above max_steps = " + std::to_string(cfg.max_steps));
  }

  SimulationResult res;
  res.kernel = std::string(kt.name);
  res.times = grid.nodes;
  res.b_min = cfg.b_min;
  res.hypotheses = validate_hypotheses(f, t_start, cfg.window.end, cfg.hypothesis_samples);

  const Trajectory yp =
      primary_trajectory(f, cfg.treatment_start, cfg.primary_mode, grid.nodes, cfg.flow);
  res.primary.reserve(nodes);
  res.source.reserve(nodes);
  for (double t : grid.nodes) {
    res.primary.push_back(yp.at(t));
    res.source.push_back(colonization_rate(law, res.primary.back()));
  }

  res.compatibility = check_compatibility(f, law, u0, t_start, res.source[0]);

  // First row: the boundary value at t_start and, for nonzero u0, a tail of
  // characteristics seeded at the primary sizes and at b.
  MeshRow row;
  row.t = t_start;
  row.triangular = 1;
  row.x.push_back(1.0);
  const double g1 = simd::growth_rate(f.slice_within(t_start, grid[0], grid[1]), 1.0);
  if (!(g1 > 0.0)) throw SolverError("G(t_start, 1) <= 0; boundary flux undefined");
  row.u.push_back(res.source[0] / g1);
  if (!u0.is_zero()) {
    std::vector<double> seeds;
    for (std::size_t i = 1; i < nodes; ++i) {
      const double y = res.primary[i];
      if (y > 1.0 && y < b) seeds.push_back(y);
    }
    seeds.push_back(b);
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    for (double y : seeds) {
      row.x.push_back(y);
      row.u.push_back(u0(y));
    }
  }
  // Discrete initial norm: the whole first row, boundary cell included.
  res.u0_l1 = metastatic_index(row.x, row.u, 1.0);

  res.mi.assign(cfg.b_min.size(), {});
  for (auto& s : res.mi) s.reserve(nodes);
  res.l1.reserve(nodes);

  std::vector<double> snaps = cfg.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;

  auto& inv = res.invariants;
  inv.min_u = row.u[0];
  auto record = [&](const MeshRow& r) {
    for (std::size_t k = 0; k < cfg.b_min.size(); ++k)
      res.mi[k].push_back(metastatic_index(r.x, r.u, cfg.b_min[k]));
    res.l1.push_back(metastatic_index(r.x, r.u, 1.0));
    for (double v : r.u) inv.min_u = std::min(inv.min_u, v);
    inv.max_row_length = std::max(inv.max_row_length, r.size());
    while (next_snap < snaps.size() &&
           snaps[next_snap] <= r.t + 1e-9 * std::max(1.0, std::abs(r.t))) {
      res.snapshots.push_back(r);
      ++next_snap;
    }
    if (cfg.keep_rows) res.rows.push_back(r);
  };
  record(row);

  for (std::size_t n = 1; n < nodes; ++n) {
    MeshRow next = advance_mesh(f, grid, n, row, cfg.flow, cfg.scheme);
    for (std::size_t j = 1; j < next.size(); ++j)
      if (next.x[j] == next.x[j - 1]) ++inv.merged_cells;
    step_density(f, law, grid, n, row, next, res.primary[n], cfg.scheme);
    if (cfg.scheme.diagonal == DiagonalRule::Zero)
      inv.max_abs_diagonal = std::max(inv.max_abs_diagonal, std::abs(next.u[next.triangular - 1]));
    row = std::move(next);
    record(row);
  }

  res.apriori = apriori_bound_check(res, law, b);
  return res;
}

}  // namespace metastat
