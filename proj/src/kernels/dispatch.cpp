#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "backends.hpp"

namespace noisygrad::kernels {

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const Table& table(Backend b) {
  if (!backend_available(b))
    throw std::invalid_argument("kernel backend not available: " + std::string(backend_name(b)));
  switch (b) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2:
      return detail::avx2_table();
#endif
#if defined(__aarch64__)
    case Backend::neon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

Backend detect_backend() {
  if (const char* env = std::getenv("NOISYGRAD_KERNELS"); env && std::string(env) == "scalar")
    return Backend::scalar;
  if (backend_available(Backend::avx2)) return Backend::avx2;
  if (backend_available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

namespace {
struct State {
  std::atomic<Backend> backend;
  std::atomic<const Table*> table;
  State() : backend(detect_backend()), table(&kernels::table(backend.load())) {}
};
State& state() {
  static State s;
  return s;
}
}  // namespace

Backend active_backend() { return state().backend.load(std::memory_order_relaxed); }

const Table& active() { return *state().table.load(std::memory_order_acquire); }

void set_active_backend(Backend b) {
  const Table& t = table(b);
  state().backend.store(b, std::memory_order_relaxed);
  state().table.store(&t, std::memory_order_release);
}

}  // namespace noisygrad::kernels
