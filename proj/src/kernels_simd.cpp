// SIMD kernel backends. Each function mirrors its scalar reference exactly:
// same per-element formulas, no FMA contraction, and reductions accumulate in
// the same fixed lane order, so outputs are bit-identical across backends.

#include "gazeworld/kernels.hpp"

#include <cmath>

namespace gazeworld::kernels {

#if defined(__x86_64__) || defined(_M_X64)

// -------------------------------- AVX2 ------------------------------------
// Functions carry target attributes instead of a TU-wide -mavx2 so nothing
// outside them can emit AVX instructions on CPUs that lack support.

#include <immintrin.h>

#define GW_AVX2 __attribute__((target("avx2")))

namespace {

GW_AVX2 void x_add_d(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

GW_AVX2 void x_sub_d(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

GW_AVX2 void x_mul_d(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

GW_AVX2 void x_scale_d(double a, const double* x, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

GW_AVX2 void x_axpy_d(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

GW_AVX2 double x_dot_d(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t main = n - n % 4;
  for (std::size_t i = 0; i < main; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + a[i] * b[i];
  return detail::combine_lanes(lane);
}

GW_AVX2 double x_sum_d(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t main = n - n % 4;
  for (std::size_t i = 0; i < main; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + x[i];
  return detail::combine_lanes(lane);
}

GW_AVX2 void x_ema_d(double* target, const double* online, double tau, std::size_t n) {
  const __m256d vt = _mm256_set1_pd(tau);
  const __m256d vw = _mm256_set1_pd(1.0 - tau);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(vt, _mm256_loadu_pd(target + i));
    const __m256d o = _mm256_mul_pd(vw, _mm256_loadu_pd(online + i));
    _mm256_storeu_pd(target + i, _mm256_add_pd(t, o));
  }
  const double w = 1.0 - tau;
  for (; i < n; ++i) target[i] = tau * target[i] + w * online[i];
}

GW_AVX2 void x_adamw_d(double* p, double* m, double* v, const double* g,
                       const AdamScalars<double>& s, std::size_t n) {
  const __m256d decay = _mm256_set1_pd(s.decay_mul);
  const __m256d b1 = _mm256_set1_pd(s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2);
  const __m256d omb1 = _mm256_set1_pd(s.one_minus_beta1);
  const __m256d omb2 = _mm256_set1_pd(s.one_minus_beta2);
  const __m256d ibc1 = _mm256_set1_pd(s.inv_bc1);
  const __m256d ibc2 = _mm256_set1_pd(s.inv_bc2);
  const __m256d lr = _mm256_set1_pd(s.lr);
  const __m256d eps = _mm256_set1_pd(s.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vp = _mm256_mul_pd(_mm256_loadu_pd(p + i), decay);
    const __m256d vg = _mm256_loadu_pd(g + i);
    const __m256d vm = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(omb1, vg));
    const __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(vm, ibc1);
    const __m256d vhat = _mm256_mul_pd(vv, ibc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mhat),
                                       _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    vp = _mm256_sub_pd(vp, step);
    _mm256_storeu_pd(p + i, vp);
  }
  for (; i < n; ++i) {
    p[i] = p[i] * s.decay_mul;
    m[i] = s.beta1 * m[i] + s.one_minus_beta1 * g[i];
    v[i] = s.beta2 * v[i] + s.one_minus_beta2 * (g[i] * g[i]);
    const double mhat = m[i] * s.inv_bc1;
    const double vhat = v[i] * s.inv_bc2;
    p[i] = p[i] - s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

GW_AVX2 void x_add_f(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

GW_AVX2 void x_sub_f(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

GW_AVX2 void x_mul_f(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

GW_AVX2 void x_scale_f(float a, const float* x, float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

GW_AVX2 void x_axpy_f(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

GW_AVX2 float x_dot_f(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t main = n - n % 8;
  for (std::size_t i = 0; i < main; i += 8) {
    acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  alignas(32) float lane[8];
  _mm256_store_ps(lane, acc);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + a[i] * b[i];
  return detail::combine_lanes(lane);
}

GW_AVX2 float x_sum_f(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  const std::size_t main = n - n % 8;
  for (std::size_t i = 0; i < main; i += 8) {
    acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  }
  alignas(32) float lane[8];
  _mm256_store_ps(lane, acc);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + x[i];
  return detail::combine_lanes(lane);
}

GW_AVX2 void x_ema_f(float* target, const float* online, float tau, std::size_t n) {
  const __m256 vt = _mm256_set1_ps(tau);
  const __m256 vw = _mm256_set1_ps(1.0f - tau);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 t = _mm256_mul_ps(vt, _mm256_loadu_ps(target + i));
    const __m256 o = _mm256_mul_ps(vw, _mm256_loadu_ps(online + i));
    _mm256_storeu_ps(target + i, _mm256_add_ps(t, o));
  }
  const float w = 1.0f - tau;
  for (; i < n; ++i) target[i] = tau * target[i] + w * online[i];
}

GW_AVX2 void x_adamw_f(float* p, float* m, float* v, const float* g,
                       const AdamScalars<float>& s, std::size_t n) {
  const __m256 decay = _mm256_set1_ps(s.decay_mul);
  const __m256 b1 = _mm256_set1_ps(s.beta1);
  const __m256 b2 = _mm256_set1_ps(s.beta2);
  const __m256 omb1 = _mm256_set1_ps(s.one_minus_beta1);
  const __m256 omb2 = _mm256_set1_ps(s.one_minus_beta2);
  const __m256 ibc1 = _mm256_set1_ps(s.inv_bc1);
  const __m256 ibc2 = _mm256_set1_ps(s.inv_bc2);
  const __m256 lr = _mm256_set1_ps(s.lr);
  const __m256 eps = _mm256_set1_ps(s.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vp = _mm256_mul_ps(_mm256_loadu_ps(p + i), decay);
    const __m256 vg = _mm256_loadu_ps(g + i);
    const __m256 vm = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)),
                                    _mm256_mul_ps(omb1, vg));
    const __m256 vv = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(vg, vg)));
    _mm256_storeu_ps(m + i, vm);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(vm, ibc1);
    const __m256 vhat = _mm256_mul_ps(vv, ibc2);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(lr, mhat),
                                      _mm256_add_ps(_mm256_sqrt_ps(vhat), eps));
    vp = _mm256_sub_ps(vp, step);
    _mm256_storeu_ps(p + i, vp);
  }
  for (; i < n; ++i) {
    p[i] = p[i] * s.decay_mul;
    m[i] = s.beta1 * m[i] + s.one_minus_beta1 * g[i];
    v[i] = s.beta2 * v[i] + s.one_minus_beta2 * (g[i] * g[i]);
    const float mhat = m[i] * s.inv_bc1;
    const float vhat = v[i] * s.inv_bc2;
    p[i] = p[i] - s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

bool cpu_has_avx2() { return __builtin_cpu_supports("avx2") != 0; }

}  // namespace

template <>
const KernelTable<double>& simd_table<double>() {
  static const KernelTable<double> t = [] {
    if (!cpu_has_avx2()) return scalar_table<double>();
    KernelTable<double> k = scalar_table<double>();  // max stays scalar
    k.name = "avx2";
    k.add = x_add_d;
    k.sub = x_sub_d;
    k.mul = x_mul_d;
    k.scale = x_scale_d;
    k.axpy = x_axpy_d;
    k.dot = x_dot_d;
    k.sum = x_sum_d;
    k.ema = x_ema_d;
    k.adamw = x_adamw_d;
    return k;
  }();
  return t;
}

template <>
const KernelTable<float>& simd_table<float>() {
  static const KernelTable<float> t = [] {
    if (!cpu_has_avx2()) return scalar_table<float>();
    KernelTable<float> k = scalar_table<float>();
    k.name = "avx2";
    k.add = x_add_f;
    k.sub = x_sub_f;
    k.mul = x_mul_f;
    k.scale = x_scale_f;
    k.axpy = x_axpy_f;
    k.dot = x_dot_f;
    k.sum = x_sum_f;
    k.ema = x_ema_f;
    k.adamw = x_adamw_f;
    return k;
  }();
  return t;
}

#elif defined(__aarch64__)

// -------------------------------- NEON ------------------------------------
// NEON registers are half the AVX2 width, so each kernel works on register
// pairs to keep the canonical lane count (4 doubles / 8 floats) and the same
// reduction order as the other backends.

#include <arm_neon.h>

namespace {

void n_add_d(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    vst1q_f64(out + i + 2, vaddq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void n_sub_d(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    vst1q_f64(out + i + 2, vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void n_mul_d(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    vst1q_f64(out + i + 2, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void n_scale_d(double a, const double* x, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(out + i + 2, vmulq_f64(va, vld1q_f64(x + i + 2)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

void n_axpy_d(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    vst1q_f64(y + i + 2, vaddq_f64(vld1q_f64(y + i + 2), vmulq_f64(va, vld1q_f64(x + i + 2))));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

double n_dot_d(const double* a, const double* b, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);  // lanes 0,1
  float64x2_t acc23 = vdupq_n_f64(0.0);  // lanes 2,3
  const std::size_t main = n - n % 4;
  for (std::size_t i = 0; i < main; i += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double lane[4];
  vst1q_f64(lane, acc01);
  vst1q_f64(lane + 2, acc23);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + a[i] * b[i];
  return detail::combine_lanes(lane);
}

double n_sum_d(const double* x, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  const std::size_t main = n - n % 4;
  for (std::size_t i = 0; i < main; i += 4) {
    acc01 = vaddq_f64(acc01, vld1q_f64(x + i));
    acc23 = vaddq_f64(acc23, vld1q_f64(x + i + 2));
  }
  double lane[4];
  vst1q_f64(lane, acc01);
  vst1q_f64(lane + 2, acc23);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + x[i];
  return detail::combine_lanes(lane);
}

void n_ema_d(double* target, const double* online, double tau, std::size_t n) {
  const float64x2_t vt = vdupq_n_f64(tau);
  const float64x2_t vw = vdupq_n_f64(1.0 - tau);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t t = vmulq_f64(vt, vld1q_f64(target + i));
    const float64x2_t o = vmulq_f64(vw, vld1q_f64(online + i));
    vst1q_f64(target + i, vaddq_f64(t, o));
  }
  const double w = 1.0 - tau;
  for (; i < n; ++i) target[i] = tau * target[i] + w * online[i];
}

void n_adamw_d(double* p, double* m, double* v, const double* g,
               const AdamScalars<double>& s, std::size_t n) {
  const float64x2_t decay = vdupq_n_f64(s.decay_mul);
  const float64x2_t b1 = vdupq_n_f64(s.beta1);
  const float64x2_t b2 = vdupq_n_f64(s.beta2);
  const float64x2_t omb1 = vdupq_n_f64(s.one_minus_beta1);
  const float64x2_t omb2 = vdupq_n_f64(s.one_minus_beta2);
  const float64x2_t ibc1 = vdupq_n_f64(s.inv_bc1);
  const float64x2_t ibc2 = vdupq_n_f64(s.inv_bc2);
  const float64x2_t lr = vdupq_n_f64(s.lr);
  const float64x2_t eps = vdupq_n_f64(s.eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vp = vmulq_f64(vld1q_f64(p + i), decay);
    const float64x2_t vg = vld1q_f64(g + i);
    const float64x2_t vm = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(omb1, vg));
    const float64x2_t vv = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)),
                                     vmulq_f64(omb2, vmulq_f64(vg, vg)));
    vst1q_f64(m + i, vm);
    vst1q_f64(v + i, vv);
    const float64x2_t mhat = vmulq_f64(vm, ibc1);
    const float64x2_t vhat = vmulq_f64(vv, ibc2);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, mhat), vaddq_f64(vsqrtq_f64(vhat), eps));
    vp = vsubq_f64(vp, step);
    vst1q_f64(p + i, vp);
  }
  for (; i < n; ++i) {
    p[i] = p[i] * s.decay_mul;
    m[i] = s.beta1 * m[i] + s.one_minus_beta1 * g[i];
    v[i] = s.beta2 * v[i] + s.one_minus_beta2 * (g[i] * g[i]);
    const double mhat = m[i] * s.inv_bc1;
    const double vhat = v[i] * s.inv_bc2;
    p[i] = p[i] - s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void n_add_f(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    vst1q_f32(out + i + 4, vaddq_f32(vld1q_f32(a + i + 4), vld1q_f32(b + i + 4)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void n_sub_f(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    vst1q_f32(out + i, vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    vst1q_f32(out + i + 4, vsubq_f32(vld1q_f32(a + i + 4), vld1q_f32(b + i + 4)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void n_mul_f(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    vst1q_f32(out + i + 4, vmulq_f32(vld1q_f32(a + i + 4), vld1q_f32(b + i + 4)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void n_scale_f(float a, const float* x, float* out, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    vst1q_f32(out + i, vmulq_f32(va, vld1q_f32(x + i)));
    vst1q_f32(out + i + 4, vmulq_f32(va, vld1q_f32(x + i + 4)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

void n_axpy_f(float a, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(va, vld1q_f32(x + i))));
    vst1q_f32(y + i + 4, vaddq_f32(vld1q_f32(y + i + 4), vmulq_f32(va, vld1q_f32(x + i + 4))));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

float n_dot_f(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);  // lanes 0..3
  float32x4_t acc1 = vdupq_n_f32(0.0f);  // lanes 4..7
  const std::size_t main = n - n % 8;
  for (std::size_t i = 0; i < main; i += 8) {
    acc0 = vaddq_f32(acc0, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    acc1 = vaddq_f32(acc1, vmulq_f32(vld1q_f32(a + i + 4), vld1q_f32(b + i + 4)));
  }
  float lane[8];
  vst1q_f32(lane, acc0);
  vst1q_f32(lane + 4, acc1);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + a[i] * b[i];
  return detail::combine_lanes(lane);
}

float n_sum_f(const float* x, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  const std::size_t main = n - n % 8;
  for (std::size_t i = 0; i < main; i += 8) {
    acc0 = vaddq_f32(acc0, vld1q_f32(x + i));
    acc1 = vaddq_f32(acc1, vld1q_f32(x + i + 4));
  }
  float lane[8];
  vst1q_f32(lane, acc0);
  vst1q_f32(lane + 4, acc1);
  for (std::size_t i = main; i < n; ++i) lane[i - main] = lane[i - main] + x[i];
  return detail::combine_lanes(lane);
}

void n_ema_f(float* target, const float* online, float tau, std::size_t n) {
  const float32x4_t vt = vdupq_n_f32(tau);
  const float32x4_t vw = vdupq_n_f32(1.0f - tau);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t t = vmulq_f32(vt, vld1q_f32(target + i));
    const float32x4_t o = vmulq_f32(vw, vld1q_f32(online + i));
    vst1q_f32(target + i, vaddq_f32(t, o));
  }
  const float w = 1.0f - tau;
  for (; i < n; ++i) target[i] = tau * target[i] + w * online[i];
}

void n_adamw_f(float* p, float* m, float* v, const float* g,
               const AdamScalars<float>& s, std::size_t n) {
  const float32x4_t decay = vdupq_n_f32(s.decay_mul);
  const float32x4_t b1 = vdupq_n_f32(s.beta1);
  const float32x4_t b2 = vdupq_n_f32(s.beta2);
  const float32x4_t omb1 = vdupq_n_f32(s.one_minus_beta1);
  const float32x4_t omb2 = vdupq_n_f32(s.one_minus_beta2);
  const float32x4_t ibc1 = vdupq_n_f32(s.inv_bc1);
  const float32x4_t ibc2 = vdupq_n_f32(s.inv_bc2);
  const float32x4_t lr = vdupq_n_f32(s.lr);
  const float32x4_t eps = vdupq_n_f32(s.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t vp = vmulq_f32(vld1q_f32(p + i), decay);
    const float32x4_t vg = vld1q_f32(g + i);
    const float32x4_t vm = vaddq_f32(vmulq_f32(b1, vld1q_f32(m + i)), vmulq_f32(omb1, vg));
    const float32x4_t vv = vaddq_f32(vmulq_f32(b2, vld1q_f32(v + i)),
                                     vmulq_f32(omb2, vmulq_f32(vg, vg)));
    vst1q_f32(m + i, vm);
    vst1q_f32(v + i, vv);
    const float32x4_t mhat = vmulq_f32(vm, ibc1);
    const float32x4_t vhat = vmulq_f32(vv, ibc2);
    const float32x4_t step = vdivq_f32(vmulq_f32(lr, mhat), vaddq_f32(vsqrtq_f32(vhat), eps));
    vp = vsubq_f32(vp, step);
    vst1q_f32(p + i, vp);
  }
  for (; i < n; ++i) {
    p[i] = p[i] * s.decay_mul;
    m[i] = s.beta1 * m[i] + s.one_minus_beta1 * g[i];
    v[i] = s.beta2 * v[i] + s.one_minus_beta2 * (g[i] * g[i]);
    const float mhat = m[i] * s.inv_bc1;
    const float vhat = v[i] * s.inv_bc2;
    p[i] = p[i] - s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

template <>
const KernelTable<double>& simd_table<double>() {
  static const KernelTable<double> t = [] {
    KernelTable<double> k = scalar_table<double>();
    k.name = "neon";
    k.add = n_add_d;
    k.sub = n_sub_d;
    k.mul = n_mul_d;
    k.scale = n_scale_d;
    k.axpy = n_axpy_d;
    k.dot = n_dot_d;
    k.sum = n_sum_d;
    k.ema = n_ema_d;
    k.adamw = n_adamw_d;
    return k;
  }();
  return t;
}

template <>
const KernelTable<float>& simd_table<float>() {
  static const KernelTable<float> t = [] {
    KernelTable<float> k = scalar_table<float>();
    k.name = "neon";
    k.add = n_add_f;
    k.sub = n_sub_f;
    k.mul = n_mul_f;
    k.scale = n_scale_f;
    k.axpy = n_axpy_f;
    k.dot = n_dot_f;
    k.sum = n_sum_f;
    k.ema = n_ema_f;
    k.adamw = n_adamw_f;
    return k;
  }();
  return t;
}

#else

template <>
const KernelTable<double>& simd_table<double>() { return scalar_table<double>(); }

template <>
const KernelTable<float>& simd_table<float>() { return scalar_table<float>(); }

#endif

}  // namespace gazeworld::kernels
