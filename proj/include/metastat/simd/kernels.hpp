#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "metastat/simd/field_slice.hpp"

namespace metastat::simd {

enum class Isa { Scalar, Avx2 };

/// Batch kernels over one mesh row. Every table computes the same quantities;
/// the scalar table is the reference the vector tables are tested against.
/// Spans passed as outputs must not alias inputs unless stated.
struct KernelTable {
  Isa isa;
  std::string_view name;

  /// out[i] = G(x[i]).
  void (*growth)(const FieldSlice& f, std::span<const double> x, std::span<double> out);
  /// out[i] = dG/dx(x[i]).
  void (*growth_dx)(const FieldSlice& f, std::span<const double> x, std::span<double> out);
  /// out[i] = m * x[i]^alpha.
  void (*colonization)(double m, double alpha, std::span<const double> x, std::span<double> out);
  /// One RK4 step of length h in ln x (see rk4_log_step), in place. `begin`, `mid` and `end`
  /// are the field at t, t + h/2 and t + h.
  void (*rk4_step)(const FieldSlice& begin, const FieldSlice& mid, const FieldSlice& end,
                   double h, std::span<double> x);
  /// dst[i] = src[i] * exp(-half_k * (dg_src[i] + dg_dst[i])).
  void (*propagate)(std::span<const double> src, std::span<const double> dg_src,
                    std::span<const double> dg_dst, double half_k, std::span<double> dst);
  /// sum_{i>=1} (x[i] - x[i-1]) * (y[i] + y[i-1]) / 2.
  double (*trapezoid)(std::span<const double> x, std::span<const double> y);
  /// Trapezoid of the pointwise product p*q on abscissae x.
  double (*product_trapezoid)(std::span<const double> x, std::span<const double> p,
                              std::span<const double> q);
  /// sum a[i] * b[i].
  double (*dot)(std::span<const double> a, std::span<const double> b);
  /// sum exp(c0 + c1 * d[i]) * w[i].
  double (*exp_affine_dot)(double c0, double c1, std::span<const double> d,
                           std::span<const double> w);
};

const KernelTable& scalar_kernels();

/// nullptr when the build or the running CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// The table selected for this process. First use picks the widest supported
/// ISA, unless METASTAT_SIMD=scalar|avx2 says otherwise.
const KernelTable& kernels();

/// Forces the active table; returns false if `isa` is unavailable.
bool select_kernels(Isa isa);

}  // namespace metastat::simd
