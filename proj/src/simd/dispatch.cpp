#include <atomic>
#include <cstdlib>
#include <string_view>

#include "metastat/simd/kernels.hpp"

namespace metastat::simd {

#if METASTAT_HAVE_AVX2
namespace detail {
const KernelTable& avx2_table();
}
#endif

namespace {

bool cpu_has_avx2() {
#if METASTAT_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const KernelTable* widest = avx2_kernels();
  if (const char* env = std::getenv("METASTAT_SIMD")) {
    const std::string_view want{env};
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && widest) return widest;
  }
  return widest ? widest : &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if METASTAT_HAVE_AVX2
  static const bool ok = cpu_has_avx2();
  return ok ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

bool select_kernels(Isa isa) {
  const KernelTable* t = isa == Isa::Scalar ? &scalar_kernels() : avx2_kernels();
  if (!t) return false;
  active_slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace metastat::simd
