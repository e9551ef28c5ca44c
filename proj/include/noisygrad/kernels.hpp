#pragma once
// Vector reduction and update kernels with a scalar reference path and
// SIMD variants chosen at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace noisygrad::kernels {

enum class Backend { scalar, avx2, neon };

struct Table {
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_sq)(const double* x, std::size_t n);
  double (*sum_abs)(const double* x, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
  // Sum of (x_i - c)^2.
  double (*centered_sum_sq)(const double* x, std::size_t n, double c);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x_i = min(max(x_i, lo_i), hi_i)
  void (*clamp)(double* x, const double* lo, const double* hi, std::size_t n);
};

bool backend_available(Backend b);
// Throws std::invalid_argument if the backend is not available on this CPU.
const Table& table(Backend b);
Backend active_backend();
void set_active_backend(Backend b);
std::string_view backend_name(Backend b);

// Best backend for this CPU, unless NOISYGRAD_KERNELS=scalar is set.
Backend detect_backend();

// Table of the active backend; cached, cheap to call.
const Table& active();

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline double sum_sq(std::span<const double> x) { return active().sum_sq(x.data(), x.size()); }
inline double sum_abs(std::span<const double> x) { return active().sum_abs(x.data(), x.size()); }
inline double max_abs(std::span<const double> x) { return active().max_abs(x.data(), x.size()); }
inline double centered_sum_sq(std::span<const double> x, double c) {
  return active().centered_sum_sq(x.data(), x.size(), c);
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline void clamp(std::span<double> x, std::span<const double> lo, std::span<const double> hi) {
  active().clamp(x.data(), lo.data(), hi.data(), x.size());
}

}  // namespace noisygrad::kernels
