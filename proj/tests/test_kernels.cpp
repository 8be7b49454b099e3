#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "lsef/kernels/kernels.hpp"
#include "lsef/error.hpp"
#include "test_util.hpp"

using namespace lsef;
using namespace lsef::kernels;

namespace {

template <typename T>
std::vector<T> noise(std::size_t n, unsigned seed) {
  std::mt19937 g(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(d(g));
  return v;
}

// FMA and lane-wise partial sums reorder additions; bound by a few ulps
// of the magnitude sum.
template <typename T>
double tol(std::size_t terms) {
  return (std::is_same_v<T, float> ? 2e-6 : 1e-14) * static_cast<double>(terms + 1);
}

template <typename T>
class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!avx2_available()) GTEST_SKIP() << "AVX2 not available on this CPU";
  }
  const KernelTable<T>& ref = scalar_table<T>();
  const KernelTable<T>& simd = avx2_table<T>();
};

using Types = ::testing::Types<float, double>;
TYPED_TEST_SUITE(KernelEquivalence, Types);

TYPED_TEST(KernelEquivalence, VectorKernels) {
  using T = TypeParam;
  for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 257u}) {
    const auto x = noise<T>(n, 1 + n), y = noise<T>(n, 2 + n);
    auto y1 = y, y2 = y;
    this->ref.axpy(n, T(0.75), x.data(), y1.data());
    this->simd.axpy(n, T(0.75), x.data(), y2.data());
    EXPECT_LE(tu::max_abs_diff(y1, y2), tol<T>(1)) << "axpy n=" << n;

    EXPECT_NEAR(this->ref.dot(n, x.data(), y.data()), this->simd.dot(n, x.data(), y.data()), tol<T>(n))
        << "dot n=" << n;

    std::vector<T> m1(n), m2(n);
    this->ref.mul(n, x.data(), y.data(), m1.data());
    this->simd.mul(n, x.data(), y.data(), m2.data());
    EXPECT_EQ(m1, m2) << "mul n=" << n;

    auto a1 = y, a2 = y;
    this->ref.accumulate(n, x.data(), a1.data());
    this->simd.accumulate(n, x.data(), a2.data());
    EXPECT_EQ(a1, a2) << "accumulate n=" << n;
  }
}

TYPED_TEST(KernelEquivalence, Gemm) {
  using T = TypeParam;
  struct Dims { std::size_t m, n, k; };
  for (const Dims d : {Dims{1, 1, 1}, Dims{3, 5, 4}, Dims{7, 33, 9}, Dims{16, 16, 16}, Dims{5, 67, 13},
                       Dims{40, 3, 70}}) {
    const std::size_t pad = 3;
    // nn: A MxK, B KxN
    {
      const std::size_t lda = d.k + pad, ldb = d.n + pad, ldc = d.n + pad;
      const auto a = noise<T>(d.m * lda, 11), b = noise<T>(d.k * ldb, 12), c0 = noise<T>(d.m * ldc, 13);
      auto c1 = c0, c2 = c0;
      this->ref.gemm_nn(d.m, d.n, d.k, a.data(), lda, b.data(), ldb, c1.data(), ldc);
      this->simd.gemm_nn(d.m, d.n, d.k, a.data(), lda, b.data(), ldb, c2.data(), ldc);
      EXPECT_LE(tu::max_abs_diff(c1, c2), tol<T>(d.k)) << "nn " << d.m << "x" << d.n << "x" << d.k;
    }
    // nt: A MxK, B NxK
    {
      const std::size_t lda = d.k + pad, ldb = d.k + pad, ldc = d.n + pad;
      const auto a = noise<T>(d.m * lda, 21), b = noise<T>(d.n * ldb, 22), c0 = noise<T>(d.m * ldc, 23);
      auto c1 = c0, c2 = c0;
      this->ref.gemm_nt(d.m, d.n, d.k, a.data(), lda, b.data(), ldb, c1.data(), ldc);
      this->simd.gemm_nt(d.m, d.n, d.k, a.data(), lda, b.data(), ldb, c2.data(), ldc);
      EXPECT_LE(tu::max_abs_diff(c1, c2), tol<T>(d.k)) << "nt " << d.m << "x" << d.n << "x" << d.k;
    }
    // tn: A KxM, B KxN
    {
      const std::size_t lda = d.m + pad, ldb = d.n + pad, ldc = d.n + pad;
      const auto a = noise<T>(d.k * lda, 31), b = noise<T>(d.k * ldb, 32), c0 = noise<T>(d.m * ldc, 33);
      auto c1 = c0, c2 = c0;
      this->ref.gemm_tn(d.m, d.n, d.k, a.data(), lda, b.data(), ldb, c1.data(), ldc);
      this->simd.gemm_tn(d.m, d.n, d.k, a.data(), lda, b.data(), ldb, c2.data(), ldc);
      EXPECT_LE(tu::max_abs_diff(c1, c2), tol<T>(d.k)) << "tn " << d.m << "x" << d.n << "x" << d.k;
    }
  }
}

TYPED_TEST(KernelEquivalence, VolumeConvolution) {
  using T = TypeParam;
  struct Case { std::size_t t, h, w, kt, kh, kw, st, sh, sw; };
  for (const Case c : {Case{4, 6, 6, 3, 3, 3, 1, 1, 1}, Case{5, 9, 19, 3, 5, 5, 1, 1, 1},
                       Case{3, 10, 10, 3, 3, 3, 1, 2, 2}, Case{2, 7, 13, 1, 1, 1, 1, 1, 1},
                       Case{6, 5, 25, 3, 3, 3, 2, 1, 1}, Case{3, 4, 4, 1, 3, 3, 1, 1, 3}}) {
    VolumeConv g{c.t, c.h, c.w, c.kt, c.kh, c.kw, c.st, c.sh, c.sw,
                 (c.t - c.kt) / c.st + 1, (c.h - c.kh) / c.sh + 1, (c.w - c.kw) / c.sw + 1};
    const std::size_t in_n = c.t * c.h * c.w, k_n = c.kt * c.kh * c.kw, out_n = g.out_t * g.out_h * g.out_w;
    const auto in = noise<T>(in_n, 41), k = noise<T>(k_n, 42), go = noise<T>(out_n, 43);

    auto o1 = noise<T>(out_n, 44), o2 = o1;
    this->ref.conv_forward(g, in.data(), k.data(), o1.data());
    this->simd.conv_forward(g, in.data(), k.data(), o2.data());
    EXPECT_LE(tu::max_abs_diff(o1, o2), tol<T>(k_n)) << "forward";

    auto gi1 = noise<T>(in_n, 45), gi2 = gi1;
    this->ref.conv_backward_input(g, go.data(), k.data(), gi1.data());
    this->simd.conv_backward_input(g, go.data(), k.data(), gi2.data());
    EXPECT_LE(tu::max_abs_diff(gi1, gi2), tol<T>(k_n)) << "backward input";

    auto gk1 = noise<T>(k_n, 46), gk2 = gk1;
    this->ref.conv_backward_kernel(g, in.data(), go.data(), gk1.data());
    this->simd.conv_backward_kernel(g, in.data(), go.data(), gk2.data());
    EXPECT_LE(tu::max_abs_diff(gk1, gk2), tol<T>(out_n)) << "backward kernel";
  }
}

}  // namespace

TEST(KernelDispatch, ScopedOverrideRestores) {
  const Backend before = active_backend();
  {
    ScopedBackend s(Backend::scalar);
    EXPECT_EQ(active_backend(), Backend::scalar);
    EXPECT_EQ(active<double>().backend, Backend::scalar);
  }
  EXPECT_EQ(active_backend(), before);
}

TEST(KernelDispatch, Avx2RequestWithoutSupportIsConfigurationError) {
  if (avx2_available()) {
    ScopedBackend s(Backend::avx2);
    EXPECT_EQ(active<float>().backend, Backend::avx2);
  } else {
    try {
      set_backend(Backend::avx2);
      FAIL() << "expected a configuration error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::configuration);
    }
  }
}
