#include <cmath>

#include "metastat/simd/kernels.hpp"

namespace metastat::simd {
namespace {

void growth(const FieldSlice& f, std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = growth_rate(f, x[i]);
}

void growth_dx(const FieldSlice& f, std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = growth_rate_dx(f, x[i]);
}

void colonization(double m, double alpha, std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = m * std::pow(x[i], alpha);
}

void rk4_step(const FieldSlice& begin, const FieldSlice& mid, const FieldSlice& end, double h,
              std::span<double> x) {
  for (double& xi : x) xi = rk4_log_step(begin, mid, end, h, xi);
}

void propagate(std::span<const double> src, std::span<const double> dg_src,
               std::span<const double> dg_dst, double half_k, std::span<double> dst) {
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] * std::exp(-half_k * (dg_src[i] + dg_dst[i]));
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return 0.5 * s;
}

double product_trapezoid(std::span<const double> x, std::span<const double> p,
                         std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    s += (x[i] - x[i - 1]) * (p[i] * q[i] + p[i - 1] * q[i - 1]);
  return 0.5 * s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double exp_affine_dot(double c0, double c1, std::span<const double> d,
                      std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) s += std::exp(c0 + c1 * d[i]) * w[i];
  return s;
}

constexpr KernelTable kScalar{
    Isa::Scalar, "scalar", growth,   growth_dx, colonization,   rk4_step,
    propagate,   trapezoid, product_trapezoid, dot, exp_affine_dot,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace metastat::simd
