#include <algorithm>
#include <cmath>

#include "lsef/kernels/kernels.hpp"
#include "lsef/ops.hpp"
#include "ops_detail.hpp"

namespace lsef {
namespace {

enum class BinaryKind { add, sub, mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind, std::string_view name) {
  const Shape out_shape = detail::broadcast_shape(a.shape(), b.shape(), name.data());
  const std::size_t n = numel(out_shape);
  std::vector<T> out(n);
  const auto& k = kernels::active<T>();
  const bool same = a.shape() == b.shape();
  const T* pa = a.data().data();
  const T* pb = b.data().data();

  if (same) {
    switch (kind) {
      case BinaryKind::add:
        std::copy(pa, pa + n, out.begin());
        k.accumulate(n, pb, out.data());
        break;
      case BinaryKind::sub:
        for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] - pb[i];
        break;
      case BinaryKind::mul:
        k.mul(n, pa, pb, out.data());
        break;
    }
  } else {
    const auto sa = detail::broadcast_strides(a.shape(), out_shape);
    const auto sb = detail::broadcast_strides(b.shape(), out_shape);
    detail::for_each_index2(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      switch (kind) {
        case BinaryKind::add:
          out[i] = pa[ia] + pb[ib];
          break;
        case BinaryKind::sub:
          out[i] = pa[ia] - pb[ib];
          break;
        case BinaryKind::mul:
          out[i] = pa[ia] * pb[ib];
          break;
      }
    });
  }

  Shape a_shape = a.shape(), b_shape = b.shape();
  return make_op_result<T>(
      name, out_shape, std::move(out), {a, b},
      [kind, same, a_shape, b_shape](detail::BackwardArgs<T>& args) {
        const T* g = args.grad_out.data();
        const std::size_t n = args.grad_out.size();
        const T* va = args.in(0).data.data();
        const T* vb = args.in(1).data.data();
        T* ga = args.grad_in[0];
        T* gb = args.grad_in[1];
        if (same) {
          for (std::size_t i = 0; i < n; ++i) {
            switch (kind) {
              case BinaryKind::add:
                if (ga) ga[i] += g[i];
                if (gb) gb[i] += g[i];
                break;
              case BinaryKind::sub:
                if (ga) ga[i] += g[i];
                if (gb) gb[i] -= g[i];
                break;
              case BinaryKind::mul:
                if (ga) ga[i] += g[i] * vb[i];
                if (gb) gb[i] += g[i] * va[i];
                break;
            }
          }
          return;
        }
        const Shape& out_shape = args.out.shape;
        const auto sa = detail::broadcast_strides(a_shape, out_shape);
        const auto sb = detail::broadcast_strides(b_shape, out_shape);
        detail::for_each_index2(out_shape, sa, sb,
                                [&](std::size_t i, std::size_t ia, std::size_t ib) {
                                  switch (kind) {
                                    case BinaryKind::add:
                                      if (ga) ga[ia] += g[i];
                                      if (gb) gb[ib] += g[i];
                                      break;
                                    case BinaryKind::sub:
                                      if (ga) ga[ia] += g[i];
                                      if (gb) gb[ib] -= g[i];
                                      break;
                                    case BinaryKind::mul:
                                      if (ga) ga[ia] += g[i] * vb[ib];
                                      if (gb) gb[ib] += g[i] * va[ia];
                                      break;
                                  }
                                });
      });
}

// y = f(x); backward multiplies by d(x, y).
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, std::string_view name, F f, D d) {
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_op_result<T>(name, x.shape(), std::move(out), {x},
                           [d](detail::BackwardArgs<T>& args) {
                             T* gx = args.grad_in[0];
                             if (!gx) return;
                             const auto& xv = args.in(0).data;
                             const auto& yv = args.out.data;
                             for (std::size_t i = 0; i < xv.size(); ++i)
                               gx[i] += args.grad_out[i] * d(xv[i], yv[i]);
                           });
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, std::span<const std::size_t> axes, bool keepdim,
                     bool average, std::string_view name) {
  const Shape& in_shape = x.shape();
  std::vector<bool> reduced(in_shape.size(), false);
  for (auto ax : axes) {
    require(ax < in_shape.size(), ErrorKind::dimension,
            std::string(name) + ": axis " + std::to_string(ax) + " out of range for " +
                to_string(in_shape));
    reduced[ax] = true;
  }
  Shape kept(in_shape.size());
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < in_shape.size(); ++i) {
    kept[i] = reduced[i] ? 1 : in_shape[i];
    if (reduced[i]) count *= in_shape[i];
    if (!reduced[i] || keepdim) out_shape.push_back(kept[i]);
  }
  const T factor = average ? T(1) / static_cast<T>(count) : T(1);
  std::vector<T> out(numel(kept), T(0));
  const auto in_strides = detail::contiguous_strides(in_shape);
  const auto out_strides = detail::broadcast_strides(kept, in_shape);
  const auto xv = x.data();
  detail::for_each_index2(in_shape, in_strides, out_strides,
                          [&](std::size_t, std::size_t ia, std::size_t io) { out[io] += xv[ia]; });
  if (average)
    for (auto& v : out) v *= factor;

  return make_op_result<T>(
      name, out_shape, std::move(out), {x}, [kept, factor](detail::BackwardArgs<T>& args) {
        T* gx = args.grad_in[0];
        if (!gx) return;
        const Shape& in_shape = args.in(0).shape;
        const auto in_strides = detail::contiguous_strides(in_shape);
        const auto out_strides = detail::broadcast_strides(kept, in_shape);
        const T* g = args.grad_out.data();
        detail::for_each_index2(in_shape, in_strides, out_strides,
                                [&](std::size_t, std::size_t ia, std::size_t io) {
                                  gx[ia] += g[io] * factor;
                                });
      });
}

std::vector<std::size_t> all_axes(std::size_t rank) {
  std::vector<std::size_t> v(rank);
  for (std::size_t i = 0; i < rank; ++i) v[i] = i;
  return v;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::add, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::sub, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::mul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return unary(a, "scale", [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary(a, "add_scalar", [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return unary(a, "neg", [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        // Split by sign so exp never overflows.
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, "relu", [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(
      x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> gaussian(const Tensor<T>& x, T s) {
  require(s > 0, ErrorKind::configuration, "gaussian: width must be positive");
  const T inv = T(1) / (T(2) * s * s);
  return unary(
      x, "gaussian", [inv](T v) { return std::exp(-v * v * inv); },
      [inv](T v, T y) { return T(-2) * v * inv * y; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const auto axes = all_axes(x.rank());
  return reduce_sum(x, axes, false, false, "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const auto axes = all_axes(x.rank());
  return reduce_sum(x, axes, false, true, "mean");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::span<const std::size_t> axes, bool keepdim) {
  return reduce_sum(x, axes, keepdim, false, "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::span<const std::size_t> axes, bool keepdim) {
  return reduce_sum(x, axes, keepdim, true, "mean");
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require(x.rank() == 5, ErrorKind::dimension, "global_avg_pool expects (B,C,T,H,W)");
  return mean(x, {2, 3, 4}, true);
}

template <typename T>
Tensor<T> spatial_avg_pool(const Tensor<T>& x) {
  require(x.rank() == 5, ErrorKind::dimension, "spatial_avg_pool expects (B,C,T,H,W)");
  return mean(x, {3, 4}, true);
}

#define LSEF_INSTANTIATE(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> scale(const Tensor<T>&, T);                                         \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                    \
  template Tensor<T> neg(const Tensor<T>&);                                              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                          \
  template Tensor<T> relu(const Tensor<T>&);                                             \
  template Tensor<T> tanh(const Tensor<T>&);                                             \
  template Tensor<T> exp(const Tensor<T>&);                                              \
  template Tensor<T> square(const Tensor<T>&);                                           \
  template Tensor<T> gaussian(const Tensor<T>&, T);                                      \
  template Tensor<T> sum(const Tensor<T>&);                                              \
  template Tensor<T> mean(const Tensor<T>&);                                             \
  template Tensor<T> sum(const Tensor<T>&, std::span<const std::size_t>, bool);          \
  template Tensor<T> mean(const Tensor<T>&, std::span<const std::size_t>, bool);         \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                  \
  template Tensor<T> spatial_avg_pool(const Tensor<T>&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
