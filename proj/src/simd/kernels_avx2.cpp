// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "metastat/simd/kernels.hpp"

namespace metastat::simd {
namespace {

using V = __m256d;
constexpr std::size_t kLanes = 4;

inline V set1(double v) { return _mm256_set1_pd(v); }
inline V load(const double* p) { return _mm256_loadu_pd(p); }
inline void store(double* p, V v) { _mm256_storeu_pd(p, v); }

inline double hsum(V v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 2^n for integral n in [-1022, 1023], n held as a double.
inline V pow2i(V n) {
  const V magic = set1(4503599627370496.0 + 1023.0);  // 2^52 + bias
  const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), 52);
  return _mm256_castsi256_pd(bits);
}

// Cephes-style exp: range reduction by ln2 then a (3,4) rational in r^2.
inline V vexp(V x) {
  const V hi = set1(709.78);
  const V lo = set1(-708.39);
  const V underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const V overflow = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
  const V xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const V n = _mm256_round_pd(_mm256_mul_pd(xc, set1(1.4426950408889634073599)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  V r = _mm256_fnmadd_pd(n, set1(6.93145751953125E-1), xc);
  r = _mm256_fnmadd_pd(n, set1(1.42860682030941723212E-6), r);
  const V rr = _mm256_mul_pd(r, r);

  V p = set1(1.26177193074810590878E-4);
  p = _mm256_fmadd_pd(p, rr, set1(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, rr, set1(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, r);
  V q = set1(3.00198505138664455042E-6);
  q = _mm256_fmadd_pd(q, rr, set1(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, rr, set1(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, rr, set1(2.00000000000000000009E0));
  V e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(set1(2.0), e, set1(1.0));

  // Split the scale so n = 1024 near the overflow edge stays representable.
  const V n1 = _mm256_floor_pd(_mm256_mul_pd(n, set1(0.5)));
  const V n2 = _mm256_sub_pd(n, n1);
  e = _mm256_mul_pd(_mm256_mul_pd(e, pow2i(n1)), pow2i(n2));

  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), underflow);
  e = _mm256_blendv_pd(e, set1(HUGE_VAL), overflow);
  // NaN in, NaN out.
  const V nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  return _mm256_blendv_pd(e, x, nan);
}

// Natural log for positive normal x. Cephes log: frexp, shift the mantissa
// into [sqrt(1/2), sqrt(2)), then log1p via a (5,5) rational.
inline V vlog(V x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i expo = _mm256_srli_epi64(bits, 52);
  const V e_raw = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(expo, _mm256_set1_epi64x(0x4330000000000000LL))),
      set1(4503599627370496.0 + 1022.0));
  V m = _mm256_castsi256_pd(_mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
      _mm256_set1_epi64x(0x3FE0000000000000LL)));

  const V below = _mm256_cmp_pd(m, set1(0.70710678118654752440), _CMP_LT_OQ);
  const V e = _mm256_sub_pd(e_raw, _mm256_and_pd(below, set1(1.0)));
  m = _mm256_add_pd(_mm256_sub_pd(m, set1(1.0)), _mm256_and_pd(below, m));

  const V z = _mm256_mul_pd(m, m);
  V p = set1(1.01875663804580931796E-4);
  p = _mm256_fmadd_pd(p, m, set1(4.97494994976747001425E-1));
  p = _mm256_fmadd_pd(p, m, set1(4.70579119878881725854E0));
  p = _mm256_fmadd_pd(p, m, set1(1.44989225341610930846E1));
  p = _mm256_fmadd_pd(p, m, set1(1.79368678507819816313E1));
  p = _mm256_fmadd_pd(p, m, set1(7.70838733755885391666E0));
  V q = _mm256_add_pd(m, set1(1.12873587189167450590E1));
  q = _mm256_fmadd_pd(q, m, set1(4.52279145837532221105E1));
  q = _mm256_fmadd_pd(q, m, set1(8.29875266912776603211E1));
  q = _mm256_fmadd_pd(q, m, set1(7.11544750618994398598E1));
  q = _mm256_fmadd_pd(q, m, set1(2.31251620126765340583E1));

  V y = _mm256_mul_pd(_mm256_mul_pd(m, z), _mm256_div_pd(p, q));
  y = _mm256_fnmadd_pd(e, set1(2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(set1(0.5), z, y);
  V r = _mm256_add_pd(m, y);
  return _mm256_fmadd_pd(e, set1(0.693359375), r);
}

struct KillV {
  V coef, threshold, inv_delta;
  bool active;
  bool exact;
};

inline KillV make_kill(const KillSlice& k) {
  return {set1(k.coef), set1(k.threshold), set1(k.delta > 0.0 ? 1.0 / k.delta : 0.0),
          k.coef != 0.0, !(k.delta > 0.0)};
}

inline V clamp01(V s) { return _mm256_min_pd(_mm256_max_pd(s, _mm256_setzero_pd()), set1(1.0)); }

inline V kill_value(const KillV& k, V x) {
  const V y = _mm256_sub_pd(x, k.threshold);
  V h;
  if (k.exact) {
    h = _mm256_and_pd(_mm256_cmp_pd(y, _mm256_setzero_pd(), _CMP_GT_OQ), set1(1.0));
  } else {
    const V s = clamp01(_mm256_mul_pd(y, k.inv_delta));
    V poly = _mm256_fmadd_pd(set1(6.0), s, set1(-15.0));
    poly = _mm256_fmadd_pd(poly, s, set1(10.0));
    h = _mm256_mul_pd(_mm256_mul_pd(_mm256_mul_pd(s, s), s), poly);
  }
  return _mm256_mul_pd(k.coef, _mm256_mul_pd(y, h));
}

inline V kill_dx(const KillV& k, V x) {
  const V y = _mm256_sub_pd(x, k.threshold);
  if (k.exact)
    return _mm256_and_pd(_mm256_cmp_pd(y, _mm256_setzero_pd(), _CMP_GT_OQ), k.coef);
  const V s = clamp01(_mm256_mul_pd(y, k.inv_delta));
  const V t = _mm256_sub_pd(set1(1.0), s);
  V poly = _mm256_fmadd_pd(set1(6.0), s, set1(-15.0));
  poly = _mm256_fmadd_pd(poly, s, set1(10.0));
  const V ss = _mm256_mul_pd(s, s);
  const V h = _mm256_mul_pd(_mm256_mul_pd(ss, s), poly);
  const V d1 = _mm256_mul_pd(_mm256_mul_pd(set1(30.0), _mm256_mul_pd(ss, _mm256_mul_pd(t, t))),
                             k.inv_delta);
  return _mm256_mul_pd(k.coef, _mm256_fmadd_pd(y, d1, h));
}

struct SliceV {
  V a, log_b;
  KillV chemo, radio;
};

inline SliceV make_slice(const FieldSlice& f) {
  return {set1(f.a), set1(f.log_b), make_kill(f.chemo), make_kill(f.radio)};
}

inline V growth_v(const SliceV& f, V x) {
  V g = _mm256_mul_pd(_mm256_mul_pd(f.a, x), _mm256_sub_pd(f.log_b, vlog(x)));
  if (f.chemo.active) g = _mm256_sub_pd(g, kill_value(f.chemo, x));
  if (f.radio.active) g = _mm256_sub_pd(g, kill_value(f.radio, x));
  return g;
}

inline V growth_dx_v(const SliceV& f, V x) {
  V g = _mm256_fmsub_pd(f.a, _mm256_sub_pd(f.log_b, vlog(x)), f.a);
  if (f.chemo.active) g = _mm256_sub_pd(g, kill_dx(f.chemo, x));
  if (f.radio.active) g = _mm256_sub_pd(g, kill_dx(f.radio, x));
  return g;
}

inline V kill_ratio_v(const KillV& k, V x) {
  return _mm256_div_pd(kill_value(k, x), x);
}

inline V log_velocity_v(const SliceV& f, V l) {
  V v = _mm256_mul_pd(f.a, _mm256_sub_pd(f.log_b, l));
  if (f.chemo.active || f.radio.active) {
    const V x = vexp(l);
    if (f.chemo.active) v = _mm256_sub_pd(v, kill_ratio_v(f.chemo, x));
    if (f.radio.active) v = _mm256_sub_pd(v, kill_ratio_v(f.radio, x));
  }
  return v;
}

void growth(const FieldSlice& f, std::span<const double> x, std::span<double> out) {
  const SliceV fv = make_slice(f);
  std::size_t i = 0;
  for (; i + kLanes <= x.size(); i += kLanes) store(&out[i], growth_v(fv, load(&x[i])));
  for (; i < x.size(); ++i) out[i] = growth_rate(f, x[i]);
}

void growth_dx(const FieldSlice& f, std::span<const double> x, std::span<double> out) {
  const SliceV fv = make_slice(f);
  std::size_t i = 0;
  for (; i + kLanes <= x.size(); i += kLanes) store(&out[i], growth_dx_v(fv, load(&x[i])));
  for (; i < x.size(); ++i) out[i] = growth_rate_dx(f, x[i]);
}

void colonization(double m, double alpha, std::span<const double> x, std::span<double> out) {
  const V mv = set1(m);
  const V av = set1(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= x.size(); i += kLanes)
    store(&out[i], _mm256_mul_pd(mv, vexp(_mm256_mul_pd(av, vlog(load(&x[i]))))));
  for (; i < x.size(); ++i) out[i] = m * std::pow(x[i], alpha);
}

void rk4_step(const FieldSlice& begin, const FieldSlice& mid, const FieldSlice& end, double h,
              std::span<double> x) {
  const SliceV b = make_slice(begin);
  const SliceV md = make_slice(mid);
  const SliceV e = make_slice(end);
  const V hv = set1(h);
  const V half = set1(0.5 * h);
  const V sixth = set1(h / 6.0);
  const V two = set1(2.0);
  std::size_t i = 0;
  for (; i + kLanes <= x.size(); i += kLanes) {
    const V xi = load(&x[i]);
    const V l = vlog(xi);
    const V k1 = log_velocity_v(b, l);
    const V k2 = log_velocity_v(md, _mm256_fmadd_pd(half, k1, l));
    const V k3 = log_velocity_v(md, _mm256_fmadd_pd(half, k2, l));
    const V k4 = log_velocity_v(e, _mm256_fmadd_pd(hv, k3, l));
    const V sum = _mm256_add_pd(_mm256_add_pd(k1, k4), _mm256_mul_pd(two, _mm256_add_pd(k2, k3)));
    const V dl = _mm256_mul_pd(sixth, sum);
    const V moved = vexp(_mm256_add_pd(l, dl));
    const V still = _mm256_cmp_pd(dl, _mm256_setzero_pd(), _CMP_EQ_OQ);
    store(&x[i], _mm256_blendv_pd(moved, xi, still));
  }
  if (i < x.size()) scalar_kernels().rk4_step(begin, mid, end, h, x.subspan(i));
}

void propagate(std::span<const double> src, std::span<const double> dg_src,
               std::span<const double> dg_dst, double half_k, std::span<double> dst) {
  const V nk = set1(-half_k);
  std::size_t i = 0;
  for (; i + kLanes <= src.size(); i += kLanes) {
    const V s = _mm256_mul_pd(nk, _mm256_add_pd(load(&dg_src[i]), load(&dg_dst[i])));
    store(&dst[i], _mm256_mul_pd(load(&src[i]), vexp(s)));
  }
  for (; i < src.size(); ++i) dst[i] = src[i] * std::exp(-half_k * (dg_src[i] + dg_dst[i]));
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2) return 0.0;
  V acc = _mm256_setzero_pd();
  std::size_t i = 1;
  for (; i + kLanes <= x.size(); i += kLanes) {
    const V h = _mm256_sub_pd(load(&x[i]), load(&x[i - 1]));
    acc = _mm256_fmadd_pd(h, _mm256_add_pd(load(&y[i]), load(&y[i - 1])), acc);
  }
  double s = hsum(acc);
  for (; i < x.size(); ++i) s += (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return 0.5 * s;
}

double product_trapezoid(std::span<const double> x, std::span<const double> p,
                         std::span<const double> q) {
  if (x.size() < 2) return 0.0;
  V acc = _mm256_setzero_pd();
  std::size_t i = 1;
  for (; i + kLanes <= x.size(); i += kLanes) {
    const V h = _mm256_sub_pd(load(&x[i]), load(&x[i - 1]));
    const V f1 = _mm256_mul_pd(load(&p[i]), load(&q[i]));
    const V f0 = _mm256_mul_pd(load(&p[i - 1]), load(&q[i - 1]));
    acc = _mm256_fmadd_pd(h, _mm256_add_pd(f1, f0), acc);
  }
  double s = hsum(acc);
  for (; i < x.size(); ++i) s += (x[i] - x[i - 1]) * (p[i] * q[i] + p[i - 1] * q[i - 1]);
  return 0.5 * s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  V acc0 = _mm256_setzero_pd();
  V acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= a.size(); i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(load(&a[i]), load(&b[i]), acc0);
    acc1 = _mm256_fmadd_pd(load(&a[i + kLanes]), load(&b[i + kLanes]), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double exp_affine_dot(double c0, double c1, std::span<const double> d,
                      std::span<const double> w) {
  const V c0v = set1(c0);
  const V c1v = set1(c1);
  V acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= d.size(); i += kLanes)
    acc = _mm256_fmadd_pd(vexp(_mm256_fmadd_pd(c1v, load(&d[i]), c0v)), load(&w[i]), acc);
  double s = hsum(acc);
  for (; i < d.size(); ++i) s += std::exp(c0 + c1 * d[i]) * w[i];
  return s;
}

constexpr KernelTable kAvx2{
    Isa::Avx2, "avx2",     growth,   growth_dx, colonization,   rk4_step,
    propagate, trapezoid, product_trapezoid, dot, exp_affine_dot,
};

}  // namespace

namespace detail {
const KernelTable& avx2_table() { return kAvx2; }
}  // namespace detail

}  // namespace metastat::simd
