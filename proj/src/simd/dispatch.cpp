#include <cstdlib>
#include <string_view>

#include "dynnet/simd/kernels.hpp"

namespace dynnet::simd {

#if defined(DYNNET_HAVE_AVX2)
const Kernels& avx2_kernels_table();
#endif

const Kernels* avx2_kernels() {
#if defined(DYNNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernels_table() : nullptr;
#else
  return nullptr;
#endif
}

const Kernels& active_kernels() {
  static const Kernels* selected = [] {
    const char* env = std::getenv("DYNNET_KERNELS");
    if (env && std::string_view(env) == "scalar") return &scalar_kernels();
    if (const Kernels* k = avx2_kernels()) return k;
    return &scalar_kernels();
  }();
  return *selected;
}

}  // namespace dynnet::simd
