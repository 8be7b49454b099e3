// AVX2/FMA variants. This translation unit alone is compiled with
// -mavx2 -mfma; nothing here may run unless avx2_available() is true.

#include "lsef/kernels/kernels.hpp"

#include <immintrin.h>

namespace lsef::kernels {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t lanes = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t lanes = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

template <typename T>
inline void axpy_inline(std::size_t n, T a, const T* x, T* y) {
  using V = Vec<T>;
  constexpr std::size_t L = V::lanes;
  const auto va = V::set1(a);
  std::size_t i = 0;
  for (; i + 2 * L <= n; i += 2 * L) {
    V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
    V::store(y + i + L, V::fmadd(va, V::load(x + i + L), V::load(y + i + L)));
  }
  for (; i + L <= n; i += L) V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
inline T dot_inline(std::size_t n, const T* x, const T* y) {
  using V = Vec<T>;
  constexpr std::size_t L = V::lanes;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * L <= n; i += 2 * L) {
    acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fmadd(V::load(x + i + L), V::load(y + i + L), acc1);
  }
  for (; i + L <= n; i += L) acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
  T s = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  axpy_inline(n, a, x, y);
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  return dot_inline(n, x, y);
}

template <typename T>
void mul(std::size_t n, const T* x, const T* y, T* out) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(out + i, V::mul(V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

template <typename T>
void accumulate(std::size_t n, const T* x, T* y) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(y + i, V::add(V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += x[i];
}

// Register-blocked row update shared by nn and tn: for one output row,
// C[j] += sum_p a(p) * B[p, j], with a(p) read through a stride.
template <typename T>
inline void gemm_row(std::size_t n, std::size_t k, const T* a, std::size_t a_stride, const T* b,
                     std::size_t ldb, T* c) {
  using V = Vec<T>;
  constexpr std::size_t L = V::lanes;
  std::size_t j = 0;
  for (; j + 4 * L <= n; j += 4 * L) {
    auto c0 = V::load(c + j);
    auto c1 = V::load(c + j + L);
    auto c2 = V::load(c + j + 2 * L);
    auto c3 = V::load(c + j + 3 * L);
    for (std::size_t p = 0; p < k; ++p) {
      const auto va = V::set1(a[p * a_stride]);
      const T* bp = b + p * ldb + j;
      c0 = V::fmadd(va, V::load(bp), c0);
      c1 = V::fmadd(va, V::load(bp + L), c1);
      c2 = V::fmadd(va, V::load(bp + 2 * L), c2);
      c3 = V::fmadd(va, V::load(bp + 3 * L), c3);
    }
    V::store(c + j, c0);
    V::store(c + j + L, c1);
    V::store(c + j + 2 * L, c2);
    V::store(c + j + 3 * L, c3);
  }
  for (; j + L <= n; j += L) {
    auto c0 = V::load(c + j);
    for (std::size_t p = 0; p < k; ++p)
      c0 = V::fmadd(V::set1(a[p * a_stride]), V::load(b + p * ldb + j), c0);
    V::store(c + j, c0);
  }
  for (; j < n; ++j) {
    T s = 0;
    for (std::size_t p = 0; p < k; ++p) s += a[p * a_stride] * b[p * ldb + j];
    c[j] += s;
  }
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(n, k, a + i * lda, 1, b, ldb, c + i * ldc);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(n, k, a + i, lda, b, ldb, c + i * ldc);
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += dot_inline(k, a + i * lda, b + j * ldb);
}

template <typename T>
inline std::size_t kidx(const VolumeConv& g, std::size_t a, std::size_t b, std::size_t c) {
  return (a * g.k_h + b) * g.k_w + c;
}

template <typename T>
void conv_forward(const VolumeConv& g, const T* in, const T* kernel, T* out) {
  using V = Vec<T>;
  constexpr std::size_t L = V::lanes;
  for (std::size_t t = 0; t < g.out_t; ++t)
    for (std::size_t h = 0; h < g.out_h; ++h) {
      T* orow = out + (t * g.out_h + h) * g.out_w;
      std::size_t w = 0;
      if (g.s_w == 1) {
        for (; w + L <= g.out_w; w += L) {
          auto acc = V::load(orow + w);
          for (std::size_t a = 0; a < g.k_t; ++a)
            for (std::size_t b = 0; b < g.k_h; ++b) {
              const T* irow = in + ((t * g.s_t + a) * g.in_h + h * g.s_h + b) * g.in_w + w;
              for (std::size_t c = 0; c < g.k_w; ++c)
                acc = V::fmadd(V::set1(kernel[kidx<T>(g, a, b, c)]), V::load(irow + c), acc);
            }
          V::store(orow + w, acc);
        }
      }
      for (; w < g.out_w; ++w) {
        T s = 0;
        for (std::size_t a = 0; a < g.k_t; ++a)
          for (std::size_t b = 0; b < g.k_h; ++b) {
            const T* irow = in + ((t * g.s_t + a) * g.in_h + h * g.s_h + b) * g.in_w + w * g.s_w;
            for (std::size_t c = 0; c < g.k_w; ++c) s += kernel[kidx<T>(g, a, b, c)] * irow[c];
          }
        orow[w] += s;
      }
    }
}

template <typename T>
void conv_backward_input(const VolumeConv& g, const T* grad_out, const T* kernel, T* grad_in) {
  for (std::size_t t = 0; t < g.out_t; ++t)
    for (std::size_t h = 0; h < g.out_h; ++h) {
      const T* go = grad_out + (t * g.out_h + h) * g.out_w;
      for (std::size_t a = 0; a < g.k_t; ++a)
        for (std::size_t b = 0; b < g.k_h; ++b) {
          T* irow = grad_in + ((t * g.s_t + a) * g.in_h + h * g.s_h + b) * g.in_w;
          for (std::size_t c = 0; c < g.k_w; ++c) {
            const T kv = kernel[kidx<T>(g, a, b, c)];
            if (g.s_w == 1) {
              axpy_inline(g.out_w, kv, go, irow + c);
            } else {
              for (std::size_t w = 0; w < g.out_w; ++w) irow[w * g.s_w + c] += kv * go[w];
            }
          }
        }
    }
}

template <typename T>
void conv_backward_kernel(const VolumeConv& g, const T* in, const T* grad_out, T* grad_kernel) {
  for (std::size_t a = 0; a < g.k_t; ++a)
    for (std::size_t b = 0; b < g.k_h; ++b)
      for (std::size_t c = 0; c < g.k_w; ++c) {
        T s = 0;
        for (std::size_t t = 0; t < g.out_t; ++t)
          for (std::size_t h = 0; h < g.out_h; ++h) {
            const T* go = grad_out + (t * g.out_h + h) * g.out_w;
            const T* irow = in + ((t * g.s_t + a) * g.in_h + h * g.s_h + b) * g.in_w + c;
            if (g.s_w == 1) {
              s += dot_inline(g.out_w, go, irow);
            } else {
              for (std::size_t w = 0; w < g.out_w; ++w) s += go[w] * irow[w * g.s_w];
            }
          }
        grad_kernel[kidx<T>(g, a, b, c)] += s;
      }
}

template <typename T>
KernelTable<T> make_table() {
  return {Backend::avx2,      &axpy<T>,         &dot<T>,     &mul<T>,
          &accumulate<T>,     &gemm_nn<T>,      &gemm_nt<T>, &gemm_tn<T>,
          &conv_forward<T>,   &conv_backward_input<T>, &conv_backward_kernel<T>};
}

const KernelTable<float> kFloatTable = make_table<float>();
const KernelTable<double> kDoubleTable = make_table<double>();

}  // namespace

template <>
const KernelTable<float>& avx2_table<float>() {
  return kFloatTable;
}

template <>
const KernelTable<double>& avx2_table<double>() {
  return kDoubleTable;
}

}  // namespace lsef::kernels
