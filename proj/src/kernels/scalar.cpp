#include "lsef/kernels/kernels.hpp"

namespace lsef::kernels {
namespace {

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void mul(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

template <typename T>
void accumulate(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] += s;
    }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[j * ldb + p];
      c[i * ldc + j] += s;
    }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * lda + i] * b[p * ldb + j];
      c[i * ldc + j] += s;
    }
}

template <typename T>
void conv_forward(const VolumeConv& g, const T* in, const T* kernel, T* out) {
  for (std::size_t t = 0; t < g.out_t; ++t)
    for (std::size_t h = 0; h < g.out_h; ++h)
      for (std::size_t w = 0; w < g.out_w; ++w) {
        T s = 0;
        for (std::size_t a = 0; a < g.k_t; ++a)
          for (std::size_t b = 0; b < g.k_h; ++b)
            for (std::size_t c = 0; c < g.k_w; ++c) {
              const std::size_t it = t * g.s_t + a, ih = h * g.s_h + b, iw = w * g.s_w + c;
              s += kernel[(a * g.k_h + b) * g.k_w + c] * in[(it * g.in_h + ih) * g.in_w + iw];
            }
        out[(t * g.out_h + h) * g.out_w + w] += s;
      }
}

template <typename T>
void conv_backward_input(const VolumeConv& g, const T* grad_out, const T* kernel, T* grad_in) {
  for (std::size_t t = 0; t < g.out_t; ++t)
    for (std::size_t h = 0; h < g.out_h; ++h)
      for (std::size_t w = 0; w < g.out_w; ++w) {
        const T go = grad_out[(t * g.out_h + h) * g.out_w + w];
        for (std::size_t a = 0; a < g.k_t; ++a)
          for (std::size_t b = 0; b < g.k_h; ++b)
            for (std::size_t c = 0; c < g.k_w; ++c) {
              const std::size_t it = t * g.s_t + a, ih = h * g.s_h + b, iw = w * g.s_w + c;
              grad_in[(it * g.in_h + ih) * g.in_w + iw] +=
                  kernel[(a * g.k_h + b) * g.k_w + c] * go;
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
          for (std::size_t h = 0; h < g.out_h; ++h)
            for (std::size_t w = 0; w < g.out_w; ++w) {
              const std::size_t it = t * g.s_t + a, ih = h * g.s_h + b, iw = w * g.s_w + c;
              s += grad_out[(t * g.out_h + h) * g.out_w + w] *
                   in[(it * g.in_h + ih) * g.in_w + iw];
            }
        grad_kernel[(a * g.k_h + b) * g.k_w + c] += s;
      }
}

template <typename T>
constexpr KernelTable<T> make_table() {
  return {Backend::scalar,    &axpy<T>,         &dot<T>,     &mul<T>,
          &accumulate<T>,     &gemm_nn<T>,      &gemm_nt<T>, &gemm_tn<T>,
          &conv_forward<T>,   &conv_backward_input<T>, &conv_backward_kernel<T>};
}

constexpr KernelTable<float> kFloatTable = make_table<float>();
constexpr KernelTable<double> kDoubleTable = make_table<double>();

}  // namespace

template <>
const KernelTable<float>& scalar_table<float>() {
  return kFloatTable;
}

template <>
const KernelTable<double>& scalar_table<double>() {
  return kDoubleTable;
}

}  // namespace lsef::kernels
