#include <arm_neon.h>

#include <cmath>

#include "cfel/kernels.hpp"

// NEON variants (two 128-bit accumulators reproduce the 4-lane striping of
// the scalar reference, so reductions stay bit-identical).

namespace cfel::kernels::neon {

void axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    vst1q_f64(y + i + 2, vaddq_f64(vld1q_f64(y + i + 2), vmulq_f64(va, vld1q_f64(x + i + 2))));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void aypx(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(y + i, vaddq_f64(vmulq_f64(va, vld1q_f64(y + i)), vld1q_f64(x + i)));
    vst1q_f64(y + i + 2, vaddq_f64(vmulq_f64(va, vld1q_f64(y + i + 2)), vld1q_f64(x + i + 2)));
  }
  for (; i < n; ++i) y[i] = a * y[i] + x[i];
}

void scale(double a, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(x + i + 2, vmulq_f64(va, vld1q_f64(x + i + 2)));
  }
  for (; i < n; ++i) x[i] *= a;
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
  }
  double acc[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                   vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
  for (std::size_t lane = 0; i < n; ++i, ++lane) acc[lane] += x[i] * y[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double max_abs(const double* x, std::size_t n) {
  float64x2_t vmax = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vmax = vmaxq_f64(vmax, vabsq_f64(vld1q_f64(x + i)));
  }
  double m = vgetq_lane_f64(vmax, 0);
  if (vgetq_lane_f64(vmax, 1) > m) m = vgetq_lane_f64(vmax, 1);
  for (; i < n; ++i) {
    double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

}  // namespace cfel::kernels::neon
