#include "vcreg/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace vcreg::kernels {

namespace {

const KernelOps& select() {
  const KernelOps* avx2 = avx2_ops();
  const char* env = std::getenv("VCREG_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return scalar_ops();
    if (std::strcmp(env, "avx2") == 0) return avx2 != nullptr ? *avx2 : scalar_ops();
  }
  return avx2 != nullptr ? *avx2 : scalar_ops();
}

}  // namespace

const KernelOps& ops() {
  static const KernelOps& k = select();
  return k;
}

}  // namespace vcreg::kernels
