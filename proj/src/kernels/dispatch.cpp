#include <cstdlib>
#include <string>

#include "constel/kernels.hpp"
#include "kernels_impl.hpp"

namespace constel::kernels {

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar, &detail::sq_distances_scalar,
                                 &detail::transform_residuals_scalar};
  return table;
}

const KernelTable* avx2_table() {
#if CONSTEL_HAVE_AVX2_KERNELS
  static const KernelTable table{Isa::kAvx2, &detail::sq_distances_avx2,
                                 &detail::transform_residuals_avx2};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("CONSTEL_SIMD"); forced && std::string(forced) == "scalar") {
    return scalar_table();
  }
  if (const KernelTable* avx2 = avx2_table()) return *avx2;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace constel::kernels
