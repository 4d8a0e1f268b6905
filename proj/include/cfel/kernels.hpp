#pragma once

#include <cstddef>
#include <string>

// Vector kernels behind the numeric core. Every kernel has a scalar
// reference implementation plus SIMD variants (AVX2 on x86-64, NEON on
// aarch64) selected once at startup from CPU features. All variants use the
// same 4-lane striped accumulation order for reductions, so scalar and SIMD
// results are bit-identical; equivalence is enforced by tests.
//
// The CFEL_KERNELS environment variable ("scalar", "avx2", "neon") overrides
// the automatic choice.

namespace cfel::kernels {

enum class Isa { scalar, avx2, neon };

Isa active();
const char* isa_name(Isa isa);
bool avx2_supported();

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);
// y = a * y + x  (momentum accumulation)
void aypx(double a, const double* x, double* y, std::size_t n);
// x *= a
void scale(double a, double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum_sq(const double* x, std::size_t n);
double max_abs(const double* x, std::size_t n);

// Per-ISA entry points, exposed so tests can compare variants directly.
namespace ref {
void axpy(double a, const double* x, double* y, std::size_t n);
void aypx(double a, const double* x, double* y, std::size_t n);
void scale(double a, double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max_abs(const double* x, std::size_t n);
}  // namespace ref

#ifdef __x86_64__
namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
void aypx(double a, const double* x, double* y, std::size_t n);
void scale(double a, double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max_abs(const double* x, std::size_t n);
}  // namespace avx2
#endif

#ifdef __aarch64__
namespace neon {
void axpy(double a, const double* x, double* y, std::size_t n);
void aypx(double a, const double* x, double* y, std::size_t n);
void scale(double a, double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max_abs(const double* x, std::size_t n);
}  // namespace neon
#endif

}  // namespace cfel::kernels
