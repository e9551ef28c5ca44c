#pragma once
#include "noisygrad/kernels.hpp"

namespace noisygrad::kernels::detail {
const Table& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const Table& avx2_table();
#endif
#if defined(__aarch64__)
const Table& neon_table();
#endif
}  // namespace noisygrad::kernels::detail
