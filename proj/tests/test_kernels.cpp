#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gazeworld/kernels.hpp"
#include "gazeworld/rng.hpp"

using namespace gazeworld;

namespace {

template <typename T>
std::vector<T> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, scale));
  return v;
}

// Every kernel must produce bit-identical results across backends; sizes
// cover empty, sub-lane, exact-lane, and ragged tails.
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 64, 127, 255, 1024};

template <typename T>
void check_backend_equivalence() {
  const auto& scalar = kernels::scalar_table<T>();
  const auto& simd = kernels::simd_table<T>();
  INFO("simd backend: " << simd.name);

  Rng rng(42);
  for (std::size_t n : kSizes) {
    auto a = random_vec<T>(rng, n);
    auto b = random_vec<T>(rng, n);
    std::vector<T> out1(n), out2(n);

    scalar.add(a.data(), b.data(), out1.data(), n);
    simd.add(a.data(), b.data(), out2.data(), n);
    CHECK(out1 == out2);

    scalar.sub(a.data(), b.data(), out1.data(), n);
    simd.sub(a.data(), b.data(), out2.data(), n);
    CHECK(out1 == out2);

    scalar.mul(a.data(), b.data(), out1.data(), n);
    simd.mul(a.data(), b.data(), out2.data(), n);
    CHECK(out1 == out2);

    const T c = static_cast<T>(rng.normal());
    scalar.scale(c, a.data(), out1.data(), n);
    simd.scale(c, a.data(), out2.data(), n);
    CHECK(out1 == out2);

    auto y1 = b, y2 = b;
    scalar.axpy(c, a.data(), y1.data(), n);
    simd.axpy(c, a.data(), y2.data(), n);
    CHECK(y1 == y2);

    if (n > 0) {
      CHECK(scalar.dot(a.data(), b.data(), n) == simd.dot(a.data(), b.data(), n));
      CHECK(scalar.sum(a.data(), n) == simd.sum(a.data(), n));
      CHECK(scalar.max(a.data(), n) == simd.max(a.data(), n));
    }

    auto t1 = a, t2 = a;
    scalar.ema(t1.data(), b.data(), T(0.998), n);
    simd.ema(t2.data(), b.data(), T(0.998), n);
    CHECK(t1 == t2);

    kernels::AdamScalars<T> s{T(1e-3), T(0.9),       T(0.999),   T(0.1), T(0.001),
                              T(10),   T(1000),      T(1e-8),    T(1) - T(1e-3) * T(0.04)};
    auto p1 = a, p2 = a;
    auto m1 = random_vec<T>(rng, n, 0.1), v1 = random_vec<T>(rng, n, 0.01);
    for (auto& x : v1) x = std::abs(x);
    auto m2 = m1, v2 = v1;
    scalar.adamw(p1.data(), m1.data(), v1.data(), b.data(), s, n);
    simd.adamw(p2.data(), m2.data(), v2.data(), b.data(), s, n);
    CHECK(p1 == p2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
  }
}

}  // namespace

TEST_CASE("scalar and SIMD backends are bit-identical (double)") {
  check_backend_equivalence<double>();
}

TEST_CASE("scalar and SIMD backends are bit-identical (float)") {
  check_backend_equivalence<float>();
}

TEST_CASE("dot and sum agree with a long-double reference") {
  Rng rng(7);
  for (std::size_t n : {3u, 17u, 256u, 1000u}) {
    auto a = random_vec<double>(rng, n);
    auto b = random_vec<double>(rng, n);
    long double dot_ref = 0.0L, sum_ref = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      dot_ref += static_cast<long double>(a[i]) * b[i];
      sum_ref += a[i];
    }
    const auto& k = kernels::active<double>();
    CHECK(k.dot(a.data(), b.data(), n) ==
          doctest::Approx(static_cast<double>(dot_ref)).epsilon(1e-12));
    CHECK(k.sum(a.data(), n) == doctest::Approx(static_cast<double>(sum_ref)).epsilon(1e-12));
  }
}

TEST_CASE("active backend resolves to a known name") {
  const auto name = kernels::active_backend_name();
  CHECK((name == "scalar" || name == "avx2" || name == "neon"));
}
