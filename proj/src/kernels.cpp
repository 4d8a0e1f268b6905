#include "cfel/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace cfel::kernels {

namespace ref {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void aypx(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * y[i] + x[i];
}

void scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += x[i] * y[i];
    acc[1] += x[i + 1] * y[i + 1];
    acc[2] += x[i + 2] * y[i + 2];
    acc[3] += x[i + 3] * y[i + 3];
  }
  for (std::size_t lane = 0; i < n; ++i, ++lane) acc[lane] += x[i] * y[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

}  // namespace ref

namespace {

struct Dispatch {
  Isa isa;
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*aypx)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*max_abs)(const double*, std::size_t);
};

constexpr Dispatch kScalar{Isa::scalar, ref::axpy, ref::aypx,
                           ref::scale,  ref::dot,  ref::max_abs};

#if defined(__x86_64__) && defined(CFEL_HAVE_AVX2_TU)
constexpr Dispatch kAvx2{Isa::avx2,   avx2::axpy, avx2::aypx,
                         avx2::scale, avx2::dot,  avx2::max_abs};
#endif
#if defined(__aarch64__) && defined(CFEL_HAVE_NEON_TU)
constexpr Dispatch kNeon{Isa::neon,   neon::axpy, neon::aypx,
                         neon::scale, neon::dot,  neon::max_abs};
#endif

Dispatch resolve() {
  const char* force = std::getenv("CFEL_KERNELS");
  if (force != nullptr) {
    if (std::strcmp(force, "scalar") == 0) return kScalar;
#if defined(__x86_64__) && defined(CFEL_HAVE_AVX2_TU)
    if (std::strcmp(force, "avx2") == 0) {
      if (!avx2_supported()) throw std::runtime_error("CFEL_KERNELS=avx2 but CPU lacks AVX2");
      return kAvx2;
    }
#endif
#if defined(__aarch64__) && defined(CFEL_HAVE_NEON_TU)
    if (std::strcmp(force, "neon") == 0) return kNeon;
#endif
    throw std::runtime_error(std::string("unknown CFEL_KERNELS value: ") + force);
  }
#if defined(__x86_64__) && defined(CFEL_HAVE_AVX2_TU)
  if (avx2_supported()) return kAvx2;
#endif
#if defined(__aarch64__) && defined(CFEL_HAVE_NEON_TU)
  return kNeon;
#endif
  return kScalar;
}

const Dispatch& table() {
  static const Dispatch d = resolve();
  return d;
}

}  // namespace

bool avx2_supported() {
#ifdef __x86_64__
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

Isa active() { return table().isa; }

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "?";
}

void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
void aypx(double a, const double* x, double* y, std::size_t n) { table().aypx(a, x, y, n); }
void scale(double a, double* x, std::size_t n) { table().scale(a, x, n); }
double dot(const double* x, const double* y, std::size_t n) { return table().dot(x, y, n); }
double sum_sq(const double* x, std::size_t n) { return table().dot(x, x, n); }
double max_abs(const double* x, std::size_t n) { return table().max_abs(x, n); }

}  // namespace cfel::kernels
