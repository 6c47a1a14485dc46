#pragma once

namespace metastat {

/// Gompertz parameters: proliferation rate `a` (1/day) and carrying
/// capacity `b` (cells).
struct GompertzParams {
  double a = 0.0;
  double b = 1.0;

  void validate() const;
  bool operator==(const GompertzParams&) const = default;
};

/// Seeding law beta(x) = m * x^alpha.
struct ColonizationLaw {
  double m = 0.0;
  double alpha = 1.0;

  void validate() const;
  bool operator==(const ColonizationLaw&) const = default;
};

/// g(x) = a x ln(b/x). Slightly negative for x > b. Throws DomainError for x <= 0.
double gompertz_rate(const GompertzParams& p, double x);

/// g'(x) = a ln(b/x) - a.
double gompertz_rate_dx(const GompertzParams& p, double x);

/// Untreated primary tumor started from one cell: b^(1 - exp(-a t)).
double primary_tumor_exact(const GompertzParams& p, double t);

/// beta(x) = m x^alpha. Throws DomainError for x < 0.
double colonization_rate(const ColonizationLaw& law, double x);

}  // namespace metastat
