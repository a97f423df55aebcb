#pragma once

#include <cstddef>
#include <string>

namespace gazeworld::kernels {

// Precomputed per-step scalars for the decoupled-weight-decay Adam update.
// inv_bc1/inv_bc2 are the reciprocal bias corrections 1/(1-beta^t).
template <typename T>
struct AdamScalars {
  T lr;
  T beta1;
  T beta2;
  T one_minus_beta1;
  T one_minus_beta2;
  T inv_bc1;
  T inv_bc2;
  T eps;
  T decay_mul;  // 1 - lr * weight_decay
};

// Dense inner-loop kernels. Every backend (scalar, AVX2, NEON) implements the
// same per-element formulas and, for reductions, the same fixed lane-blocked
// summation order (LANES<T> accumulators combined pairwise), so all backends
// produce bit-identical results and can be equivalence-tested exactly.
template <typename T>
struct KernelTable {
  const char* name;

  void (*add)(const T* a, const T* b, T* out, std::size_t n);
  void (*sub)(const T* a, const T* b, T* out, std::size_t n);
  void (*mul)(const T* a, const T* b, T* out, std::size_t n);
  void (*scale)(T a, const T* x, T* out, std::size_t n);  // out = a*x
  void (*axpy)(T a, const T* x, T* y, std::size_t n);     // y += a*x
  T (*dot)(const T* a, const T* b, std::size_t n);
  T (*sum)(const T* x, std::size_t n);
  T (*max)(const T* x, std::size_t n);  // n >= 1
  // target = tau*target + (1-tau)*online
  void (*ema)(T* target, const T* online, T tau, std::size_t n);
  // p *= decay_mul; m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g*g;
  // p -= lr * (m*inv_bc1) / (sqrt(v*inv_bc2) + eps)
  void (*adamw)(T* p, T* m, T* v, const T* g, const AdamScalars<T>& s,
                std::size_t n);
};

// Accumulator lane count shared by all backends (AVX2 register width).
template <typename T>
inline constexpr std::size_t lanes = sizeof(T) == 8 ? 4 : 8;

namespace detail {

// Pairwise combination of the fixed accumulator lanes. Every backend reduces
// through this exact expression tree, which is what makes scalar and SIMD
// results bit-equal.
template <typename T>
inline T combine_lanes(const T* acc) {
  if constexpr (lanes<T> == 4) {
    return (acc[0] + acc[2]) + (acc[1] + acc[3]);
  } else {
    const T a = acc[0] + acc[4];
    const T b = acc[1] + acc[5];
    const T c = acc[2] + acc[6];
    const T d = acc[3] + acc[7];
    return (a + c) + (b + d);
  }
}

}  // namespace detail

// Reference implementation; also the fallback when no SIMD backend applies.
template <typename T>
const KernelTable<T>& scalar_table();

// Best SIMD table the running CPU supports, or the scalar table if none.
template <typename T>
const KernelTable<T>& simd_table();

// Runtime-selected table: simd_table() unless overridden via the
// GAZEWORLD_KERNELS environment variable ("scalar", "avx2", "neon", "auto").
template <typename T>
const KernelTable<T>& active();

// Name of the backend active() resolves to.
std::string active_backend_name();

}  // namespace gazeworld::kernels
