#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "backends.hpp"

namespace noisygrad::kernels::detail {
namespace {

double sum(const double* x, std::size_t n) {
  float64x2_t a = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) a = vaddq_f64(a, vld1q_f64(x + i));
  double s = vaddvq_f64(a);
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t a = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) a = vaddq_f64(a, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  double s = vaddvq_f64(a);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_sq(const double* x, std::size_t n) { return dot(x, x, n); }

double sum_abs(const double* x, std::size_t n) {
  float64x2_t a = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) a = vaddq_f64(a, vabsq_f64(vld1q_f64(x + i)));
  double s = vaddvq_f64(a);
  for (; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

double max_abs(const double* x, std::size_t n) {
  float64x2_t m = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) m = vmaxq_f64(m, vabsq_f64(vld1q_f64(x + i)));
  double r = vmaxvq_f64(m);
  for (; i < n; ++i) r = std::max(r, std::fabs(x[i]));
  return r;
}

double centered_sum_sq(const double* x, std::size_t n, double c) {
  const float64x2_t cv = vdupq_n_f64(c);
  float64x2_t a = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), cv);
    a = vaddq_f64(a, vmulq_f64(d, d));
  }
  double s = vaddvq_f64(a);
  for (; i < n; ++i) {
    const double d = x[i] - c;
    s += d * d;
  }
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(av, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

void clamp(double* x, const double* lo, const double* hi, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vmaxq_f64(vld1q_f64(x + i), vld1q_f64(lo + i));
    vst1q_f64(x + i, vminq_f64(v, vld1q_f64(hi + i)));
  }
  for (; i < n; ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
}

}  // namespace

const Table& neon_table() {
  static const Table t{sum, dot, sum_sq, sum_abs, max_abs, centered_sum_sq, axpy, clamp};
  return t;
}

}  // namespace noisygrad::kernels::detail
