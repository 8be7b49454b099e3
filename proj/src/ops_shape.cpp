#include <algorithm>

#include "lsef/ops.hpp"
#include "ops_detail.hpp"

namespace lsef {

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(numel(shape) == x.numel(), ErrorKind::dimension,
          "reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_op_result<T>("reshape", std::move(shape), std::move(out), {x},
                           [](detail::BackwardArgs<T>& args) {
                             T* gx = args.grad_in[0];
                             if (!gx) return;
                             for (std::size_t i = 0; i < args.grad_out.size(); ++i)
                               gx[i] += args.grad_out[i];
                           });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::span<const std::size_t> perm) {
  const Shape& in_shape = x.shape();
  require(perm.size() == in_shape.size(), ErrorKind::dimension, "permute: rank mismatch");
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    require(p < perm.size() && !seen[p], ErrorKind::dimension, "permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(perm.size());
  const auto in_strides = detail::contiguous_strides(in_shape);
  std::vector<std::size_t> gather(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out_shape[i] = in_shape[perm[i]];
    gather[i] = in_strides[perm[i]];
  }
  const auto out_strides = detail::contiguous_strides(out_shape);
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  detail::for_each_index2(out_shape, out_strides, gather,
                          [&](std::size_t i, std::size_t, std::size_t src) { out[i] = xv[src]; });
  return make_op_result<T>("permute", out_shape, std::move(out), {x},
                           [gather, out_strides](detail::BackwardArgs<T>& args) {
                             T* gx = args.grad_in[0];
                             if (!gx) return;
                             const T* g = args.grad_out.data();
                             detail::for_each_index2(
                                 args.out.shape, out_strides, gather,
                                 [&](std::size_t i, std::size_t, std::size_t src) {
                                   gx[src] += g[i];
                                 });
                           });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  require(!parts.empty(), ErrorKind::usage, "concat: no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), ErrorKind::dimension, "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    require(p.rank() == first.size(), ErrorKind::dimension, "concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i)
      require(i == axis || p.shape()[i] == first[i], ErrorKind::dimension,
              "concat: " + to_string(p.shape()) + " incompatible with " + to_string(first));
    extents.push_back(p.shape()[axis]);
    out_shape[axis] += p.shape()[axis];
  }
  const auto split = detail::split_axis(out_shape, axis);
  std::vector<T> out(numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].data();
    const std::size_t chunk = extents[k] * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o)
      std::copy_n(src.data() + o * chunk, chunk,
                  out.data() + (o * split.extent) * split.inner + offset);
    offset += chunk;
  }
  return make_op_result<T>(
      "concat", out_shape, std::move(out), parts, [extents, split](detail::BackwardArgs<T>& args) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < extents.size(); ++k) {
          const std::size_t chunk = extents[k] * split.inner;
          if (T* g = args.grad_in[k]) {
            for (std::size_t o = 0; o < split.outer; ++o) {
              const T* src = args.grad_out.data() + (o * split.extent) * split.inner + offset;
              for (std::size_t j = 0; j < chunk; ++j) g[o * chunk + j] += src[j];
            }
          }
          offset += chunk;
        }
      });
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  const Shape out_shape = detail::broadcast_shape(shape, x.shape(), "broadcast_to");
  require(out_shape == shape, ErrorKind::dimension,
          "broadcast_to: " + to_string(x.shape()) + " -> " + to_string(shape));
  const auto sx = detail::broadcast_strides(x.shape(), shape);
  const auto so = detail::contiguous_strides(shape);
  std::vector<T> out(numel(shape));
  const auto xv = x.data();
  detail::for_each_index2(shape, so, sx,
                          [&](std::size_t i, std::size_t, std::size_t ix) { out[i] = xv[ix]; });
  return make_op_result<T>("broadcast_to", shape, std::move(out), {x},
                           [sx, so](detail::BackwardArgs<T>& args) {
                             T* gx = args.grad_in[0];
                             if (!gx) return;
                             const T* g = args.grad_out.data();
                             detail::for_each_index2(
                                 args.out.shape, so, sx,
                                 [&](std::size_t i, std::size_t, std::size_t ix) {
                                   gx[ix] += g[i];
                                 });
                           });
}

#define LSEF_INSTANTIATE(T)                                                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                              \
  template Tensor<T> permute(const Tensor<T>&, std::span<const std::size_t>);       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);            \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
