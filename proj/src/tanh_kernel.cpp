#include <cmath>

#include "dyttp/ops.hpp"

#if defined(__GNUC__)

#include "tanh_kernel.inc"

namespace dyttp::detail {

#if defined(DYTTP_HAVE_AVX2_KERNEL)
void tanh_kernel_avx2(const double* in, double* out, std::size_t n);

namespace {

bool cpu_has_avx2_fma() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported;
}

}  // namespace
#endif

void tanh_kernel(const double* in, double* out, std::size_t n) {
#if defined(DYTTP_HAVE_AVX2_KERNEL)
  if (cpu_has_avx2_fma()) {
    tanh_kernel_avx2(in, out, n);
    return;
  }
#endif
  tanh_loop(in, out, n);
}

void tanh_kernel_portable(const double* in, double* out, std::size_t n) { tanh_loop(in, out, n); }

}  // namespace dyttp::detail

#else

namespace dyttp::detail {

void tanh_kernel(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

void tanh_kernel_portable(const double* in, double* out, std::size_t n) { tanh_kernel(in, out, n); }

}  // namespace dyttp::detail

#endif
