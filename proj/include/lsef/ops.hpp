#pragma once

// Differentiable tensor operations. Binary elementwise ops broadcast over
// axes of extent 1 between operands of equal rank; any other shape pairing
// is a dimension error.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "lsef/tensor.hpp"

namespace lsef {

enum class Padding { zeros, reflect };

struct Conv3dOptions {
  std::size_t groups = 1;
  std::array<std::size_t, 3> stride{1, 1, 1};
  Padding padding = Padding::zeros;
};

// Elementwise
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> neg(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
// exp(-x^2 / (2 s^2))
template <typename T> Tensor<T> gaussian(const Tensor<T>& x, T s);

// Reductions
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::span<const std::size_t> axes, bool keepdim);
template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::span<const std::size_t> axes, bool keepdim);
template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::initializer_list<std::size_t> axes, bool keepdim) {
  return mean(x, std::span<const std::size_t>(axes.begin(), axes.size()), keepdim);
}
template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::initializer_list<std::size_t> axes, bool keepdim) {
  return sum(x, std::span<const std::size_t>(axes.begin(), axes.size()), keepdim);
}

// Mean over (T, H, W) of a (B, C, T, H, W) tensor, kept as singleton axes.
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);
// Mean over (H, W) of a (B, C, T, H, W) tensor, kept as singleton axes.
template <typename T> Tensor<T> spatial_avg_pool(const Tensor<T>& x);

// Shape manipulation
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, std::span<const std::size_t> perm);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::initializer_list<std::size_t> perm) {
  return permute(x, std::span<const std::size_t>(perm.begin(), perm.size()));
}
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);

// Products and normalizations
// Last two axes are the matrix; leading axes must match, or one operand is 2-D.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_a = false,
                 bool transpose_b = false);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <typename T> Tensor<T> l2_normalize(const Tensor<T>& x, std::size_t axis, T epsilon = T(1e-8));

// Convolution over (B, C, T, H, W) with kernel (C_out, C_in / groups, kt, kh, kw).
// Padding keeps "same" extents at unit stride: (k-1)/2 before, k/2 after.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& kernel, const Conv3dOptions& opts = {});
template <typename T>
Tensor<T> pad3d(const Tensor<T>& input, std::array<std::size_t, 3> before,
                std::array<std::size_t, 3> after, Padding mode);

// x: (B, in), weight: (out, in), bias: (out)
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// Losses
// logits: (B, K); mean softmax cross-entropy over the batch.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);
template <typename T> Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target);

// Mirror index with repeated folding, so any padding width is defined.
std::size_t reflect_index(long i, std::size_t n);

}  // namespace lsef
