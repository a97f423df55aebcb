#include "gazeworld/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace gazeworld::kernels {

namespace {

using detail::combine_lanes;

template <typename T>
void s_add(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void s_sub(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void s_mul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void s_scale(T a, const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

template <typename T>
void s_axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

template <typename T>
T s_dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t W = lanes<T>;
  T acc[W] = {};
  const std::size_t main = n - n % W;
  for (std::size_t i = 0; i < main; i += W) {
    for (std::size_t j = 0; j < W; ++j) acc[j] = acc[j] + a[i + j] * b[i + j];
  }
  for (std::size_t i = main; i < n; ++i) acc[i - main] = acc[i - main] + a[i] * b[i];
  return combine_lanes(acc);
}

template <typename T>
T s_sum(const T* x, std::size_t n) {
  constexpr std::size_t W = lanes<T>;
  T acc[W] = {};
  const std::size_t main = n - n % W;
  for (std::size_t i = 0; i < main; i += W) {
    for (std::size_t j = 0; j < W; ++j) acc[j] = acc[j] + x[i + j];
  }
  for (std::size_t i = main; i < n; ++i) acc[i - main] = acc[i - main] + x[i];
  return combine_lanes(acc);
}

template <typename T>
T s_max(const T* x, std::size_t n) {
  T m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

template <typename T>
void s_ema(T* target, const T* online, T tau, std::size_t n) {
  const T w = T(1) - tau;
  for (std::size_t i = 0; i < n; ++i) target[i] = tau * target[i] + w * online[i];
}

template <typename T>
void s_adamw(T* p, T* m, T* v, const T* g, const AdamScalars<T>& s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = p[i] * s.decay_mul;
    m[i] = s.beta1 * m[i] + s.one_minus_beta1 * g[i];
    v[i] = s.beta2 * v[i] + s.one_minus_beta2 * (g[i] * g[i]);
    const T mhat = m[i] * s.inv_bc1;
    const T vhat = v[i] * s.inv_bc2;
    p[i] = p[i] - s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

template <typename T>
KernelTable<T> make_scalar_table() {
  return KernelTable<T>{"scalar", s_add<T>, s_sub<T>, s_mul<T>, s_scale<T>,
                        s_axpy<T>, s_dot<T>, s_sum<T>, s_max<T>,
                        s_ema<T>, s_adamw<T>};
}

enum class Backend { kScalar, kSimd };

Backend select_backend() {
  const char* env = std::getenv("GAZEWORLD_KERNELS");
  const std::string want = env == nullptr ? "auto" : env;
  if (want == "auto") return Backend::kSimd;
  if (want == "scalar") return Backend::kScalar;
  if (want == "avx2" || want == "neon") {
    if (simd_table<double>().name != want) {
      throw std::runtime_error("GAZEWORLD_KERNELS=" + want +
                               " requested but this CPU/build provides '" +
                               simd_table<double>().name + "'");
    }
    return Backend::kSimd;
  }
  throw std::runtime_error("unknown GAZEWORLD_KERNELS value: " + want);
}

Backend cached_backend() {
  static const Backend b = select_backend();
  return b;
}

}  // namespace

template <typename T>
const KernelTable<T>& scalar_table() {
  static const KernelTable<T> t = make_scalar_table<T>();
  return t;
}

template <typename T>
const KernelTable<T>& active() {
  return cached_backend() == Backend::kScalar ? scalar_table<T>() : simd_table<T>();
}

std::string active_backend_name() { return active<double>().name; }

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();
template const KernelTable<float>& active<float>();
template const KernelTable<double>& active<double>();

}  // namespace gazeworld::kernels
