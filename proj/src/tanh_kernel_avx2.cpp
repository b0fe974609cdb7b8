#include "tanh_kernel.inc"

namespace dyttp::detail {

void tanh_kernel_avx2(const double* in, double* out, std::size_t n) { tanh_loop(in, out, n); }

}  // namespace dyttp::detail
