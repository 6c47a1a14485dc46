#include <doctest.h>

#include <cmath>
#include <vector>

#include "metastat/errors.hpp"
#include "metastat/metrics.hpp"
#include "metastat/simd/kernels.hpp"
#include "metastat/transport.hpp"

using namespace metastat;

namespace {

const GompertzParams kPaper{0.00286, 1e12};
const ColonizationLaw kLaw{5.3e-8, 2.0 / 3.0};

SimulationConfig small_config(double horizon, double step) {
  SimulationConfig cfg;
  cfg.window = {0.0, horizon};
  cfg.base_step = step;
  cfg.flow = {step, 1e-10};
  cfg.keep_rows = true;
  return cfg;
}

}  // namespace

TEST_CASE("time grid: uniform nodes") {
  const auto g = build_time_grid({0.0, 10.0}, 1.0, {});
  REQUIRE(g.size() == 11);
  for (std::size_t n = 0; n < g.size(); ++n) CHECK(g[n] == static_cast<double>(n));
  for (std::size_t n = 0; n + 1 < g.size(); ++n) CHECK(g.step(n) == 1.0);
}

TEST_CASE("time grid: a discontinuity is inserted as a node") {
  const std::vector<double> disc{2.5};
  const auto g = build_time_grid({0.0, 10.0}, 1.0, disc);
  REQUIRE(g.size() == 12);
  CHECK(g[2] == 2.0);
  CHECK(g[3] == 2.5);
  CHECK(g[4] == 3.0);
  CHECK(g.step(2) == 0.5);
}

TEST_CASE("time grid: pulse edges 9.99 and 10.01") {
  const std::vector<double> disc{9.99, 10.01};
  const auto g = build_time_grid({0.0, 20.0}, 1.0, disc);
  CHECK(std::find(g.nodes.begin(), g.nodes.end(), 9.99) != g.nodes.end());
  CHECK(std::find(g.nodes.begin(), g.nodes.end(), 10.0) != g.nodes.end());
  CHECK(std::find(g.nodes.begin(), g.nodes.end(), 10.01) != g.nodes.end());
  for (std::size_t n = 0; n + 1 < g.size(); ++n) CHECK(g.step(n) > 0.0);
}

TEST_CASE("time grid: snapping, outside instants, uneven end, errors") {
  const std::vector<double> disc{3.0 + 1e-12, -1.0, 11.0};
  const auto g = build_time_grid({0.0, 10.0}, 1.0, disc);
  CHECK(g.size() == 11);
  CHECK(g[3] == 3.0 + 1e-12);
  const auto h = build_time_grid({0.0, 10.5}, 1.0, {});
  CHECK(h.size() == 12);
  CHECK(h.step(10) == doctest::Approx(0.5));
  CHECK_THROWS_AS(build_time_grid({0.0, 10.0}, 0.0, {}), ValidationError);
  CHECK_THROWS_AS(build_time_grid({5.0, 5.0}, 1.0, {}), ValidationError);
  const std::vector<double> extra{4.5};
  CHECK(build_time_grid({0.0, 10.0}, 1.0, {}, extra).size() == 12);
}

TEST_CASE("initial density variants") {
  const auto z = InitialDensity::zero();
  CHECK(z.is_zero());
  CHECK(z(5.0) == 0.0);
  const auto s = InitialDensity::sampled({1.0, 3.0, 5.0}, {0.0, 2.0, 0.0});
  CHECK_FALSE(s.is_zero());
  CHECK(s(2.0) == doctest::Approx(1.0));
  CHECK(s(4.5) == doctest::Approx(0.5));
  CHECK(s(5.0) == 0.0);
  CHECK(s(6.0) == 0.0);
  CHECK(s(0.5) == 0.0);
  CHECK_THROWS_AS(InitialDensity::sampled({1.0}, {0.0}), ValidationError);
  CHECK_THROWS_AS(InitialDensity::sampled({3.0, 1.0}, {0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(InitialDensity::sampled({1.0, 3.0}, {-1.0, 0.0}), ValidationError);
  const auto fn = InitialDensity::function([](double x) { return 2.0 * x; });
  CHECK(fn(3.0) == 6.0);
}

TEST_CASE("zero field: characteristics are horizontal") {
  // The degenerate field G = 0 is expressed at the slice level (a = 0).
  const simd::FieldSlice zero{};
  std::vector<double> x{1.0, 2.0, 5.0, 1e6};
  const auto before = x;
  for (const auto* kt : {&simd::scalar_kernels(), simd::avx2_kernels()}) {
    if (!kt) continue;
    kt->rk4_step(zero, zero, zero, 0.7, x);
    CHECK(x == before);
  }
  // At x = b the Gompertz field vanishes too.
  const auto f = GrowthField::untreated(kPaper, {0.0, 10.0});
  const auto grid = build_time_grid({0.0, 10.0}, 1.0, {});
  MeshRow prev{0.0, 1, {1.0, kPaper.b}, {}};
  const auto row = advance_mesh(f, grid, 1, prev, {1.0, 1e-10});
  CHECK(row.x[2] == doctest::Approx(kPaper.b).epsilon(1e-15));
}

TEST_CASE("advance_mesh: one step from x = 1 follows the closed form") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 100.0});
  for (double k : {0.25, 1.0, 6.0}) {
    const auto grid = build_time_grid({0.0, 100.0}, k, {});
    MeshRow prev{0.0, 1, {1.0}, {}};
    const auto row = advance_mesh(f, grid, 1, prev, {k / 8.0, 1e-10});
    REQUIRE(row.size() == 2);
    CHECK(row.x[0] == 1.0);
    CHECK(row.x[1] == doctest::Approx(std::pow(kPaper.b, 1.0 - std::exp(-kPaper.a * k)))
                          .epsilon(1e-10));
    CHECK(row.triangular == 2);
  }
  const auto grid = build_time_grid({0.0, 10.0}, 1.0, {});
  MeshRow prev{0.0, 1, {1.0}, {}};
  CHECK_THROWS_AS(advance_mesh(f, grid, 0, prev, {1.0, 1e-10}), DomainError);
  CHECK_THROWS_AS(advance_mesh(f, grid, 11, prev, {1.0, 1e-10}), DomainError);
}

TEST_CASE("advance_mesh merges near-duplicate abscissae") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 10.0});
  const auto grid = build_time_grid({0.0, 10.0}, 1.0, {});
  MeshRow prev{0.0, 1, {1.0, kPaper.b * (1.0 - 1e-17), kPaper.b}, {}};
  const auto row = advance_mesh(f, grid, 1, prev, {1.0, 1e-10});
  CHECK(row.x[3] == row.x[2]);
  MeshRow bad{0.0, 1, {1.0, 5.0, 3.0}, {}};
  CHECK_THROWS_AS(advance_mesh(f, grid, 1, bad, {1.0, 1e-10}), SolverError);
}

TEST_CASE("simulation rows grow by one entry per step") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 20.0});
  const auto res = run_simulation(f, kLaw, InitialDensity::zero(), small_config(20.0, 1.0));
  REQUIRE(res.rows.size() == 21);
  for (std::size_t n = 0; n < res.rows.size(); ++n) {
    CHECK(res.rows[n].size() == n + 1);
    CHECK(res.rows[n].triangular == n + 1);
    CHECK(res.rows[n].x[0] == 1.0);
    for (std::size_t i = 1; i < res.rows[n].size(); ++i)
      CHECK(res.rows[n].x[i] > res.rows[n].x[i - 1]);
  }
  CHECK(res.invariants.max_row_length == 21);
}

TEST_CASE("survival factor special cases") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 10.0});
  // dG/dx vanishes at x = b/e.
  const double xe = kPaper.b / std::exp(1.0);
  CHECK(survival_factor(f, 0.0, 1.0, xe, xe) == doctest::Approx(1.0).epsilon(1e-12));
  // Constant slope c along a horizontal segment: exp(-c k).
  const double x = 1e3;
  const double c = gompertz_rate_dx(kPaper, x);
  CHECK(survival_factor(f, 2.0, 2.5, x, x) == doctest::Approx(std::exp(-c * 0.5)).epsilon(1e-14));
}

TEST_CASE("survival factor has O(k^3) local error along the exact flow") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 1000.0});
  const double lb = std::log(kPaper.b);
  auto exact_flow = [&](double x, double k) {
    return std::exp(lb - (lb - std::log(x)) * std::exp(-kPaper.a * k));
  };
  const double x0 = 10.0;
  std::vector<double> errs;
  for (double k : {64.0, 32.0, 16.0, 8.0}) {
    const double x1 = exact_flow(x0, k);
    const double approx = -std::log(survival_factor(f, 0.0, k, x0, x1));
    const double exact = gompertz_survival_exponent(kPaper, x0, 0.0, k);
    errs.push_back(std::abs(approx - exact));
  }
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    CAPTURE(errs[i]);
    CHECK(std::log2(errs[i] / errs[i + 1]) == doctest::Approx(3.0).epsilon(0.05));
  }
}

TEST_CASE("boundary quadrature") {
  const ColonizationLaw flat{1.0, 1e-300};  // beta == 1 on any practical range
  const double h = 0.5;
  MeshRow row;
  for (int i = 0; i < 6; ++i) {
    row.x.push_back(1.0 + h * i);
    row.u.push_back(1.0);
  }
  const double n = static_cast<double>(row.size());
  CHECK(boundary_quadrature(flat, row) == doctest::Approx(h + (n - 2) * h).epsilon(1e-14));
  CHECK(boundary_quadrature(flat, row, BoundaryQuadrature::PureTrapezoid) ==
        doctest::Approx(0.5 * h + (n - 2) * h).epsilon(1e-14));

  // Two interior points with equal beta u: h2 beta u + trapezoid on [x2, x3].
  MeshRow two{0.0, 3, {1.0, 2.0, 4.0}, {7.0, 3.0, 3.0}};
  const ColonizationLaw lin{2.0, 1.0};
  const double expected = 1.0 * (2.0 * 2.0 * 3.0) + 0.5 * 2.0 * (2.0 * 4.0 * 3.0 + 2.0 * 2.0 * 3.0);
  CHECK(boundary_quadrature(lin, two) == doctest::Approx(expected).epsilon(1e-14));

  for (auto& v : row.u) v = 0.0;
  CHECK(boundary_quadrature(flat, row) == 0.0);
  MeshRow single{0.0, 1, {1.0}, {4.0}};
  CHECK(boundary_quadrature(lin, single) == 0.0);
  MeshRow empty_u{0.0, 1, {1.0, 2.0}, {}};
  CHECK_THROWS_AS(boundary_quadrature(lin, empty_u), DomainError);
}

TEST_CASE("first boundary value: beta(1) / g(1)") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 10.0});
  const auto res = run_simulation(f, {5.3e-8, 0.55}, InitialDensity::zero(), small_config(10.0, 1.0));
  CHECK(res.rows[0].u[0] == doctest::Approx(6.707e-7).epsilon(1e-4));
  CHECK(res.rows[0].u[0] == doctest::Approx(5.3e-8 / (kPaper.a * std::log(kPaper.b))).epsilon(1e-14));
}

TEST_CASE("no seeding gives the zero solution") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 50.0});
  const auto res = run_simulation(f, {0.0, 0.55}, InitialDensity::zero(), small_config(50.0, 1.0));
  for (const auto& r : res.rows)
    for (double v : r.u) CHECK(v == 0.0);
  for (const auto& s : res.mi)
    for (double v : s) CHECK(v == 0.0);
  CHECK(res.apriori.holds);
  CHECK(res.compatibility.compatible());
}

TEST_CASE("density is nonnegative and the diagonal is zero") {
  ChemoProtocol c;
  c.schedule = {{10.0, 12.0, 30.0, 32.0}, {4.0, 0.0, 4.0}};
  c.pk = {0.5, 0.2, 0.1, 1.0};
  c.gamma = 0.05;
  c.x_bar = 1e3;
  const RadioProtocol r{{15.0, 16.0, 17.0}, 2.0, 0.05, 0.3, 0.05, 1e4};
  const GrowthField f({0.0231, 1e12}, c, r, {0.0, 60.0});
  auto cfg = small_config(60.0, 0.5);
  cfg.treatment_start = 10.0;
  const auto res = run_simulation(f, {5.3e-8, 0.55}, InitialDensity::zero(), cfg);
  CHECK(res.invariants.min_u >= 0.0);
  CHECK(res.invariants.max_abs_diagonal == 0.0);
  CHECK(res.invariants.monotone);
  for (std::size_t n = 1; n < res.rows.size(); ++n) {
    const auto& row = res.rows[n];
    CHECK(row.u[row.triangular - 1] == 0.0);
    for (double v : row.u) CHECK(v >= 0.0);
  }
  CHECK(res.apriori.holds);
  // Every discontinuity is a node.
  for (double d : f.discontinuities())
    CHECK(std::find(res.times.begin(), res.times.end(), d) != res.times.end());
}

TEST_CASE("propagate diagonal rule keeps the oldest characteristic") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 10.0});
  auto cfg = small_config(10.0, 1.0);
  cfg.scheme.diagonal = DiagonalRule::Propagate;
  const auto res = run_simulation(f, kLaw, InitialDensity::zero(), cfg);
  for (std::size_t n = 1; n < res.rows.size(); ++n)
    CHECK(res.rows[n].u[res.rows[n].triangular - 1] > 0.0);
}

TEST_CASE("step_density fails when G(t,1) <= 0") {
  ChemoProtocol c;
  c.schedule = {{0.0, 10.0}, {10.0}};
  c.pk = {0.5, 0.0, 0.0, 1.0};
  c.gamma = 5.0;
  c.x_bar = 0.0;
  const GrowthField f(kPaper, c, std::nullopt, {0.0, 10.0}, 0.0);
  auto cfg = small_config(10.0, 1.0);
  CHECK_THROWS_AS(run_simulation(f, kLaw, InitialDensity::zero(), cfg), SolverError);
}

TEST_CASE("nonzero initial data seeds a tail along the primary history") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 20.0});
  const double lb = std::log(kPaper.b);
  const auto u0 = InitialDensity::function([&](double x) { return 1e-6 * (lb - std::log(x)) / lb; });
  const auto res = run_simulation(f, kLaw, u0, small_config(20.0, 1.0));
  const auto& first = res.rows.front();
  CHECK(first.triangular == 1);
  CHECK(first.x.back() == kPaper.b);
  CHECK(first.u.back() == 0.0);
  for (std::size_t i = 1; i < first.size(); ++i) CHECK(first.x[i] > first.x[i - 1]);
  CHECK(res.u0_l1 > 0.0);
  CHECK(res.apriori.holds);
  CHECK(res.invariants.min_u >= 0.0);
}

TEST_CASE("compatibility checks") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 10.0});
  const auto zero = check_compatibility(f, kLaw, InitialDensity::zero(), 0.0, 0.0);
  CHECK(zero.compatible());
  const auto flagged =
      check_compatibility(f, kLaw, InitialDensity::zero(), 0.0, colonization_rate(kLaw, 1.0));
  CHECK_FALSE(flagged.flux_ok);
  CHECK(flagged.boundary_ok);

  // u0 = c (ln b - ln x)/ln b with c solving g(1) c = c int beta phi + f0, where
  // the integral uses the same log-spaced trapezoid as the check. Weak seeding
  // keeps int beta phi below g(1).
  const ColonizationLaw law{1e-19, 0.5};
  const double lb = std::log(kPaper.b);
  auto phi = [&](double x) { return (lb - std::log(x)) / lb; };
  const std::size_t samples = 4096;
  double integral = 0.0;
  double xp = 1.0;
  double wp = colonization_rate(law, 1.0) * phi(1.0);
  for (std::size_t i = 1; i < samples; ++i) {
    const double x = i + 1 == samples ? kPaper.b : std::exp(lb * static_cast<double>(i) / (samples - 1));
    const double w = colonization_rate(law, x) * phi(x);
    integral += 0.5 * (x - xp) * (w + wp);
    xp = x;
    wp = w;
  }
  const double f0 = 1e-9;
  const double g1 = gompertz_rate(kPaper, 1.0);
  REQUIRE(g1 > integral);
  const double c = f0 / (g1 - integral);
  const auto u0 = InitialDensity::function([&](double x) { return c * phi(x); });
  const auto rep = check_compatibility(f, law, u0, 0.0, f0, samples);
  CHECK(rep.boundary_ok);
  CHECK(rep.flux_ok);
  CHECK(rep.compatible());
  const auto off = check_compatibility(f, law, u0, 0.0, 2.0 * f0, samples);
  CHECK_FALSE(off.flux_ok);
  const auto top = check_compatibility(f, kLaw, InitialDensity::function([](double) { return 1.0; }),
                                       0.0, 0.0);
  CHECK_FALSE(top.boundary_ok);
}

TEST_CASE("simulation config validation") {
  auto cfg = small_config(10.0, 1.0);
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.base_step = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.treatment_start = 20.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.b_min = {0.5};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.max_steps = 5;
  const auto f = GrowthField::untreated(kPaper, {0.0, 10.0});
  CHECK_THROWS_AS(run_simulation(f, kLaw, InitialDensity::zero(), bad), ValidationError);
}

TEST_CASE("snapshots and streaming") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 30.0});
  auto cfg = small_config(30.0, 1.0);
  cfg.keep_rows = false;
  cfg.snapshot_times = {10.0, 0.0, 30.0};
  const auto res = run_simulation(f, kLaw, InitialDensity::zero(), cfg);
  CHECK(res.rows.empty());
  REQUIRE(res.snapshots.size() == 3);
  CHECK(res.snapshots[0].t == 0.0);
  CHECK(res.snapshots[1].t == 10.0);
  CHECK(res.snapshots[2].t == 30.0);
  CHECK(res.snapshots[1].size() == 11);
  CHECK(res.mi[0].size() == res.times.size());
  CHECK(res.l1 == res.mi[0]);
}

TEST_CASE("simulation is deterministic") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 40.0});
  const auto a = run_simulation(f, kLaw, InitialDensity::zero(), small_config(40.0, 0.5));
  const auto b = run_simulation(f, kLaw, InitialDensity::zero(), small_config(40.0, 0.5));
  CHECK(a.mi == b.mi);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t n = 0; n < a.rows.size(); ++n) {
    CHECK(a.rows[n].x == b.rows[n].x);
    CHECK(a.rows[n].u == b.rows[n].u);
  }
}
