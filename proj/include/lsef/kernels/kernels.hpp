#pragma once

// Inner-loop kernels behind the tensor ops. Every kernel exists as a plain
// scalar reference and, when the CPU supports it, an AVX2/FMA variant. The
// active table is picked once at first use and can be overridden for tests
// or through LSEF_SIMD=scalar|avx2.

#include <cstddef>
#include <string_view>

namespace lsef::kernels {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend b);

// Geometry of a single-channel valid correlation over an already padded
// volume: out[t,h,w] += sum k[a,b,c] * in[t*st + a, h*sh + b, w*sw + c].
struct VolumeConv {
  std::size_t in_t, in_h, in_w;
  std::size_t k_t, k_h, k_w;
  std::size_t s_t, s_h, s_w;
  std::size_t out_t, out_h, out_w;
};

template <typename T>
struct KernelTable {
  Backend backend;

  // y += a * x
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);
  // out = x * y elementwise
  void (*mul)(std::size_t n, const T* x, const T* y, T* out);
  // y += x
  void (*accumulate)(std::size_t n, const T* x, T* y);

  // Row-major accumulating products, C[M,N] += op(A) * op(B).
  // nn: A is MxK, B is KxN.  nt: A is MxK, B is NxK.  tn: A is KxM, B is KxN.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                  const T* b, std::size_t ldb, T* c, std::size_t ldc);
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                  const T* b, std::size_t ldb, T* c, std::size_t ldc);
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                  const T* b, std::size_t ldb, T* c, std::size_t ldc);

  void (*conv_forward)(const VolumeConv& g, const T* in, const T* kernel, T* out);
  // grad_in += scatter(grad_out, kernel)
  void (*conv_backward_input)(const VolumeConv& g, const T* grad_out, const T* kernel,
                              T* grad_in);
  // grad_kernel += correlate(in, grad_out)
  void (*conv_backward_kernel)(const VolumeConv& g, const T* in, const T* grad_out,
                               T* grad_kernel);
};

template <typename T>
const KernelTable<T>& scalar_table();

bool avx2_available();

// Only valid when avx2_available().
template <typename T>
const KernelTable<T>& avx2_table();

template <typename T>
const KernelTable<T>& active();

Backend active_backend();
void set_backend(Backend b);

// Restores the previous backend on destruction.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active_backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace lsef::kernels
