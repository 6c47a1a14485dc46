#include <doctest.h>

#include <cmath>
#include <random>

#include "metastat/errors.hpp"
#include "metastat/field.hpp"

using namespace metastat;

namespace {

const GompertzParams kPaper{0.00286, 1e12};

ChemoProtocol chemo(double x_bar, double gamma = 0.02) {
  ChemoProtocol c;
  c.schedule = {{10.0, 11.0, 31.0, 32.0}, {2.0, 0.0, 2.0}};
  c.pk = {0.5, 0.2, 0.1, 1.0};
  c.gamma = gamma;
  c.x_bar = x_bar;
  return c;
}

RadioProtocol radio(double x_hat) {
  return RadioProtocol{{12.5, 13.5, 14.5}, 2.0, 0.05, 0.3, 0.05, x_hat};
}

}  // namespace

TEST_CASE("untreated field is the Gompertz rate") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 100.0});
  for (double x : {1.0, 10.0, 1e6, 1e11}) {
    CHECK(f.eval(3.0, x) == gompertz_rate(kPaper, x));
    CHECK(f.eval_dx(3.0, x) == doctest::Approx(gompertz_rate_dx(kPaper, x)).epsilon(1e-14));
    CHECK(f.eval_dxx(3.0, x) == doctest::Approx(-kPaper.a / x).epsilon(1e-14));
  }
  CHECK(f.untreated());
  CHECK(f.discontinuities().empty());
  CHECK_THROWS_AS(f.eval(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(f.eval_dx(1.0, -2.0), DomainError);
  CHECK_THROWS_AS(f.eval_dxx(1.0, 0.0), DomainError);
}

TEST_CASE("below both thresholds the field is untreated") {
  const GrowthField f(kPaper, chemo(1e6), radio(1e7), {0.0, 100.0});
  for (double t : {10.5, 13.5, 40.0})
    for (double x : {1.0, 100.0, 9e5}) CHECK(f.eval(t, x) == gompertz_rate(kPaper, x));
}

TEST_CASE("eval composes g, K_c C and K_r R") {
  const auto c = chemo(1e3);
  const auto r = radio(1e4);
  const GrowthField f(kPaper, c, r, {0.0, 100.0});
  for (double t : {10.5, 12.5, 13.46, 20.0}) {
    for (double x : {5e3, 2e4, 1e9}) {
      const double expected = gompertz_rate(kPaper, x) -
                              chemo_kill_profile(c, x, default_smoothing(c.x_bar)) *
                                  f.concentration(t) -
                              radio_kill_profile(r, x, default_smoothing(r.x_hat)) *
                                  radiation_kill(r, t);
      CHECK(f.eval(t, x) == doctest::Approx(expected).epsilon(1e-14));
      CHECK(f.eval(t, x) <= gompertz_rate(kPaper, x));
    }
  }
  CHECK(f.radiation(13.5) == radiation_kill(r, 13.5));
}

TEST_CASE("eval composition example: g = 10, K_c = 2, C = 3") {
  // Pick x with g(x) = 10 from the closed form, a kill slope of 2 per cell
  // above x_bar = x - 1, and a constant infusion whose steady state is 3.
  const GompertzParams g{1.0, 100.0};
  double lo = 1.0, hi = 100.0 / std::exp(1.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gompertz_rate(g, mid) < 10.0 ? lo : hi) = mid;
  }
  const double x = 0.5 * (lo + hi);
  ChemoProtocol c;
  c.schedule = {{0.0, 1e4}, {3.0 * 1e4}};
  c.pk = {1.0, 0.0, 0.0, 1.0};
  c.gamma = 2.0;
  c.x_bar = x - 1.0;
  const GrowthField f(g, c, std::nullopt, {0.0, 1e4}, 0.0);
  CHECK(f.concentration(100.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.eval(100.0, x) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("eval_dx and eval_dxx match finite differences away from smoothing bands") {
  const auto c = chemo(1e3, 0.03);
  const auto r = radio(1e5);
  const GrowthField f(kPaper, c, r, {0.0, 100.0});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> tt(0.0, 40.0);
  std::uniform_real_distribution<double> lx(0.0, std::log(kPaper.b));
  int tested = 0;
  while (tested < 200) {
    const double t = tt(rng);
    const double x = std::exp(lx(rng));
    const double h = 1e-5 * x;
    auto in_band = [&](double th, double d) { return x + h > th && x - h < th + d; };
    if (in_band(c.x_bar, f.chemo_smoothing()) || in_band(r.x_hat, f.radio_smoothing())) continue;
    ++tested;
    const double fd = (f.eval(t, x + h) - f.eval(t, x - h)) / (2 * h);
    const double d = f.eval_dx(t, x);
    CHECK(std::abs(d - fd) <= 1e-6 * std::max(std::abs(fd), kPaper.a));
    const double fd2 = (f.eval_dx(t, x + h) - f.eval_dx(t, x - h)) / (2 * h);
    CHECK(std::abs(f.eval_dxx(t, x) - fd2) <= 1e-6 * std::max(std::abs(fd2), kPaper.a / x));
  }
}

TEST_CASE("smoothed kill keeps eval C2 across the threshold band") {
  const auto c = chemo(1e3, 0.05);
  const GrowthField f(kPaper, c, std::nullopt, {0.0, 100.0});
  const double t = 10.5;
  const double d = f.chemo_smoothing();
  CHECK(d == doctest::Approx(1.0));
  // Inside the band the analytic derivative still matches a fine difference.
  for (double y : {0.1, 0.35, 0.5, 0.8}) {
    const double x = c.x_bar + y * d;
    const double h = 1e-4;
    CHECK(f.eval_dx(t, x) ==
          doctest::Approx((f.eval(t, x + h) - f.eval(t, x - h)) / (2 * h)).epsilon(1e-6));
    CHECK(f.eval_dxx(t, x) ==
          doctest::Approx((f.eval_dx(t, x + h) - f.eval_dx(t, x - h)) / (2 * h)).epsilon(1e-5));
  }
  // Values and first two derivatives agree at both band edges.
  for (double edge : {c.x_bar, c.x_bar + d}) {
    const double e = 1e-9;
    CHECK(f.eval(t, edge - e) == doctest::Approx(f.eval(t, edge + e)).epsilon(1e-10));
    CHECK(f.eval_dx(t, edge - e) == doctest::Approx(f.eval_dx(t, edge + e)).epsilon(1e-7));
    CHECK(f.eval_dxx(t, edge - e) == doctest::Approx(f.eval_dxx(t, edge + e)).epsilon(1e-4));
  }
}

TEST_CASE("concentration re-advances the closed form from cached nodes") {
  const auto c = chemo(10.0);
  const std::vector<double> cache{10.0, 10.5, 20.0, 40.0};
  const GrowthField f(kPaper, c, std::nullopt, {0.0, 50.0}, std::nullopt, cache);
  std::vector<double> grid{10.0, 10.5, 10.75, 11.0, 20.0, 31.0, 31.3, 32.0, 40.0, 45.0};
  const auto ref = pk_solve(c, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(f.concentration(grid[i]) == doctest::Approx(ref[i].c1).epsilon(1e-13));
  CHECK(f.concentration(5.0) == 0.0);
  const GrowthField bare(kPaper, c, std::nullopt, {0.0, 50.0});
  CHECK(bare.concentration(31.3) == doctest::Approx(f.concentration(31.3)).epsilon(1e-13));
}

TEST_CASE("slice_within reads R inside the open interval") {
  const auto r = radio(1e3);
  const GrowthField f(kPaper, std::nullopt, r, {0.0, 100.0});
  const double edge = 12.5 - 0.05;  // pulse start
  const auto before = f.slice_within(edge, 12.0, edge);
  const auto during = f.slice_within(edge, edge, 12.5 + 0.05);
  CHECK(before.radio.coef == 0.0);
  CHECK(during.radio.coef == doctest::Approx(r.gamma_r * radiation_kill(r, 12.5)));
  // Closed pulses: the plain slice at the edge sees the pulse.
  CHECK(f.slice(edge).radio.coef == during.radio.coef);
}

TEST_CASE("validate_hypotheses: pure Gompertz") {
  const auto f = GrowthField::untreated(kPaper, {0.0, 500.0});
  const auto rep = validate_hypotheses(f, 0.0, 500.0, 33);
  REQUIRE(rep.checks.size() == 4);
  CHECK(rep.find("G(t,1) > 0")->status == CheckStatus::Pass);
  CHECK(rep.find("G(t0,x) > 0 on [1,b)")->status == CheckStatus::Pass);
  const auto* e3 = rep.find("G(t,b) < 0 on (t0,T]");
  CHECK(e3->status == CheckStatus::BoundaryDegenerate);
  CHECK(*e3->value == 0.0);
  CHECK(rep.find("G(.,1) constant")->status == CheckStatus::Pass);
  CHECK(rep.ok());
  CHECK(rep.find("nope") == nullptr);
  CHECK(std::string(to_string(CheckStatus::BoundaryDegenerate)) == "boundary-degenerate");
  CHECK_THROWS_AS(validate_hypotheses(f, 0.0, 500.0, 1), ValidationError);
}

TEST_CASE("validate_hypotheses: thresholds above 1 keep G(.,1) constant") {
  const GrowthField f(kPaper, chemo(1e6), radio(1e6), {0.0, 100.0});
  const auto rep = validate_hypotheses(f, 0.0, 100.0, 65);
  CHECK(rep.find("G(.,1) constant")->status == CheckStatus::Pass);
  CHECK(rep.find("G(t,1) > 0")->status == CheckStatus::Pass);
  CHECK(rep.ok());
}

TEST_CASE("validate_hypotheses: x_bar = 1 with nonzero C breaks G(.,1) constancy") {
  // Exact Heaviside and x_bar = 0 make K_c(1) = gamma.
  const GrowthField f(kPaper, chemo(0.0, 0.02), std::nullopt, {0.0, 100.0});
  const auto rep = validate_hypotheses(f, 0.0, 100.0, 65);
  const auto* c = rep.find("G(.,1) constant");
  CHECK(c->status == CheckStatus::Fail);
  REQUIRE(c->t.has_value());
  CHECK(*c->t > 10.0);
  CHECK_FALSE(rep.ok());
  // x_bar = 1 exactly: K_c(1) = 0 and the check passes.
  const GrowthField f1(kPaper, chemo(1.0, 0.02), std::nullopt, {0.0, 100.0});
  CHECK(validate_hypotheses(f1, 0.0, 100.0, 65).find("G(.,1) constant")->status ==
        CheckStatus::Pass);
}

TEST_CASE("validate_hypotheses: a strong kill at x = 1 violates G(t,1) > 0") {
  const GrowthField f(kPaper, chemo(0.0, 5.0), std::nullopt, {0.0, 100.0});
  const auto rep = validate_hypotheses(f, 0.0, 100.0, 65);
  CHECK(rep.find("G(t,1) > 0")->status == CheckStatus::Fail);
}

TEST_CASE("treated field: G(t,b) < 0 strictly when treatment is active at b") {
  ChemoProtocol c = chemo(1e3);
  c.schedule = {{0.0, 200.0}, {200.0}};
  const GrowthField f(kPaper, c, std::nullopt, {0.0, 100.0});
  const auto rep = validate_hypotheses(f, 0.0, 100.0, 33);
  CHECK(rep.find("G(t,b) < 0 on (t0,T]")->status == CheckStatus::Pass);
}
