#include "metastat/growth_model.hpp"

#include <cmath>
#include <string>

#include "metastat/errors.hpp"

namespace metastat {

void GompertzParams::validate() const {
  if (!(a > 0.0)) throw ValidationError("growth.a must be > 0, got " + std::to_string(a));
  if (!(b >= 1.0)) throw ValidationError("growth.b must be >= 1, got " + std::to_string(b));
}

void ColonizationLaw::validate() const {
  if (!(m >= 0.0)) throw ValidationError("seeding.m must be >= 0, got " + std::to_string(m));
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ValidationError("seeding.alpha must be in (0, 1], got " + std::to_string(alpha));
}

double gompertz_rate(const GompertzParams& p, double x) {
  if (!(x > 0.0)) throw DomainError("gompertz_rate: x must be > 0");
  // Same expression as simd::growth_rate so untreated fields agree bit for bit.
  return p.a * x * (std::log(p.b) - std::log(x));
}

double gompertz_rate_dx(const GompertzParams& p, double x) {
  if (!(x > 0.0)) throw DomainError("gompertz_rate_dx: x must be > 0");
  return p.a * (std::log(p.b) - std::log(x)) - p.a;
}

double primary_tumor_exact(const GompertzParams& p, double t) {
  return std::exp(std::log(p.b) * -std::expm1(-p.a * t));
}

double colonization_rate(const ColonizationLaw& law, double x) {
  if (x < 0.0) throw DomainError("colonization_rate: x must be >= 0");
  return law.m * std::pow(x, law.alpha);
}

}  // namespace metastat
