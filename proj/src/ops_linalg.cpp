#include <algorithm>
#include <cmath>

#include "lsef/kernels/kernels.hpp"
#include "lsef/ops.hpp"
#include "ops_detail.hpp"

namespace lsef {
namespace {

struct MatmulGeometry {
  std::size_t batch = 1;
  bool a_batched = false, b_batched = false;
  std::size_t a_rows = 0, a_cols = 0, b_rows = 0, b_cols = 0;
  std::size_t m = 0, n = 0, k = 0;
  Shape out_shape;
};

MatmulGeometry matmul_geometry(const Shape& a, const Shape& b, bool ta, bool tb) {
  require(a.size() >= 2 && b.size() >= 2, ErrorKind::dimension,
          "matmul: operands must be at least 2-D, got " + to_string(a) + " and " + to_string(b));
  MatmulGeometry g;
  g.a_rows = a[a.size() - 2];
  g.a_cols = a[a.size() - 1];
  g.b_rows = b[b.size() - 2];
  g.b_cols = b[b.size() - 1];
  g.m = ta ? g.a_cols : g.a_rows;
  g.k = ta ? g.a_rows : g.a_cols;
  const std::size_t kb = tb ? g.b_cols : g.b_rows;
  g.n = tb ? g.b_rows : g.b_cols;
  require(g.k == kb, ErrorKind::dimension,
          "matmul: inner extents disagree for " + to_string(a) + " x " + to_string(b));
  const Shape lead_a(a.begin(), a.end() - 2);
  const Shape lead_b(b.begin(), b.end() - 2);
  g.a_batched = !lead_a.empty();
  g.b_batched = !lead_b.empty();
  if (g.a_batched && g.b_batched)
    require(lead_a == lead_b, ErrorKind::dimension,
            "matmul: batch axes disagree for " + to_string(a) + " x " + to_string(b));
  const Shape& lead = g.a_batched ? lead_a : lead_b;
  g.batch = numel(lead);
  g.out_shape = lead;
  g.out_shape.push_back(g.m);
  g.out_shape.push_back(g.n);
  return g;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_a, bool transpose_b) {
  if (transpose_a && transpose_b) {
    std::vector<std::size_t> perm(a.rank());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    return matmul(permute(a, perm), b, false, true);
  }
  const MatmulGeometry g = matmul_geometry(a.shape(), b.shape(), transpose_a, transpose_b);
  const auto& kt = kernels::active<T>();
  const std::size_t a_size = g.a_rows * g.a_cols, b_size = g.b_rows * g.b_cols;
  const std::size_t c_size = g.m * g.n;
  std::vector<T> out(g.batch * c_size, T(0));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t bi = 0; bi < g.batch; ++bi) {
    const T* ab = pa + (g.a_batched ? bi * a_size : 0);
    const T* bb = pb + (g.b_batched ? bi * b_size : 0);
    T* cb = out.data() + bi * c_size;
    if (!transpose_a && !transpose_b)
      kt.gemm_nn(g.m, g.n, g.k, ab, g.a_cols, bb, g.b_cols, cb, g.n);
    else if (!transpose_a)
      kt.gemm_nt(g.m, g.n, g.k, ab, g.a_cols, bb, g.b_cols, cb, g.n);
    else
      kt.gemm_tn(g.m, g.n, g.k, ab, g.a_cols, bb, g.b_cols, cb, g.n);
  }
  return make_op_result<T>(
      "matmul", g.out_shape, std::move(out), {a, b},
      [g, transpose_a, transpose_b, a_size, b_size, c_size](detail::BackwardArgs<T>& args) {
        const auto& kt = kernels::active<T>();
        const T* pa = args.in(0).data.data();
        const T* pb = args.in(1).data.data();
        T* ga = args.grad_in[0];
        T* gb = args.grad_in[1];
        const std::size_t m = g.m, n = g.n, k = g.k;
        for (std::size_t bi = 0; bi < g.batch; ++bi) {
          const T* A = pa + (g.a_batched ? bi * a_size : 0);
          const T* B = pb + (g.b_batched ? bi * b_size : 0);
          const T* dC = args.grad_out.data() + bi * c_size;
          T* dA = ga ? ga + (g.a_batched ? bi * a_size : 0) : nullptr;
          T* dB = gb ? gb + (g.b_batched ? bi * b_size : 0) : nullptr;
          if (!transpose_a && !transpose_b) {
            if (dA) kt.gemm_nt(m, k, n, dC, n, B, n, dA, k);
            if (dB) kt.gemm_tn(k, n, m, A, k, dC, n, dB, n);
          } else if (!transpose_a) {
            if (dA) kt.gemm_nn(m, k, n, dC, n, B, k, dA, k);
            if (dB) kt.gemm_tn(n, k, m, dC, n, A, k, dB, k);
          } else {
            if (dA) kt.gemm_nt(k, m, n, B, n, dC, n, dA, m);
            if (dB) kt.gemm_nn(k, n, m, A, m, dC, n, dB, n);
          }
        }
      });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto s = detail::split_axis(x.shape(), axis);
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      T mx = xv[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
      T total = 0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const T v = std::exp(xv[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      const T inv = T(1) / total;
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] *= inv;
    }
  return make_op_result<T>("softmax", x.shape(), std::move(out), {x},
                           [s](detail::BackwardArgs<T>& args) {
                             T* gx = args.grad_in[0];
                             if (!gx) return;
                             const auto& y = args.out.data;
                             const T* g = args.grad_out.data();
                             for (std::size_t o = 0; o < s.outer; ++o)
                               for (std::size_t i = 0; i < s.inner; ++i) {
                                 const std::size_t base = o * s.extent * s.inner + i;
                                 T d = 0;
                                 for (std::size_t e = 0; e < s.extent; ++e)
                                   d += g[base + e * s.inner] * y[base + e * s.inner];
                                 for (std::size_t e = 0; e < s.extent; ++e) {
                                   const std::size_t j = base + e * s.inner;
                                   gx[j] += y[j] * (g[j] - d);
                                 }
                               }
                           });
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, std::size_t axis, T epsilon) {
  require(epsilon > 0, ErrorKind::configuration, "l2_normalize: epsilon must be positive");
  const auto s = detail::split_axis(x.shape(), axis);
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  std::vector<T> norms(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      T ss = 0;
      for (std::size_t e = 0; e < s.extent; ++e) ss += xv[base + e * s.inner] * xv[base + e * s.inner];
      const T nrm = std::sqrt(ss);
      norms[o * s.inner + i] = nrm;
      const T inv = T(1) / std::max(nrm, epsilon);
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] = xv[base + e * s.inner] * inv;
    }
  return make_op_result<T>(
      "l2_normalize", x.shape(), std::move(out), {x},
      [s, epsilon, norms = std::move(norms)](detail::BackwardArgs<T>& args) {
        T* gx = args.grad_in[0];
        if (!gx) return;
        const auto& y = args.out.data;
        const T* g = args.grad_out.data();
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.extent * s.inner + i;
            const T nrm = norms[o * s.inner + i];
            if (nrm > epsilon) {
              T d = 0;
              for (std::size_t e = 0; e < s.extent; ++e)
                d += g[base + e * s.inner] * y[base + e * s.inner];
              for (std::size_t e = 0; e < s.extent; ++e) {
                const std::size_t j = base + e * s.inner;
                gx[j] += (g[j] - y[j] * d) / nrm;
              }
            } else {
              for (std::size_t e = 0; e < s.extent; ++e) gx[base + e * s.inner] += g[base + e * s.inner] / epsilon;
            }
          }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(x.rank() == 2 && weight.rank() == 2 && bias.rank() == 1, ErrorKind::dimension,
          "linear: expects x (B,in), weight (out,in), bias (out)");
  require(bias.dim(0) == weight.dim(0), ErrorKind::dimension, "linear: bias extent mismatch");
  return add(matmul(x, weight, false, true), reshape(bias, {1, bias.dim(0)}));
}

#define LSEF_INSTANTIATE(T)                                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool);   \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                   \
  template Tensor<T> l2_normalize(const Tensor<T>&, std::size_t, T);           \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
