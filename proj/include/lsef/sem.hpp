#pragma once

// Stability encoding: Gaussian low-pass split into a smooth base and a
// high-frequency residual, gated refinement of the residual, and a convex
// learned fusion of the two.

#include <cstdint>
#include <vector>

#include "lsef/module.hpp"
#include "lsef/tensor.hpp"

namespace lsef {

struct SemConfig {
  std::size_t kernel_size = 3;  // odd Gaussian window
  std::size_t reduction = 4;    // channel-attention reduction ratio
};

template <typename T>
struct SemState {
  std::size_t channels = 0;
  std::size_t kernel_size = 3;
  double sigma = 1.0;  // kernel_size / 3
  Tensor<T> ca_reduce;      // (C, C/r)
  Tensor<T> ca_expand;      // (C/r, C)
  Tensor<T> energy_kernel;  // (C, 1, 3, 3, 3)
  Tensor<T> lambda_raw;     // (1); lambda = sigmoid(lambda_raw)
  std::uint64_t init_seed = 0;

  static SemState init(std::size_t channels, std::uint64_t seed, const SemConfig& cfg = {});
  ParameterList<T> parameters(const std::string& prefix = "sem.") const;
  T lambda() const;
};

// Normalized 1-D Gaussian taps for an odd window, sigma = k / 3.
std::vector<double> gaussian_taps(std::size_t k);

// Depthwise (C, 1, k, k, k) kernel: outer product of the 1-D taps.
template <typename T>
Tensor<T> gaussian_kernel3d(std::size_t channels, std::size_t k);

template <typename T>
Tensor<T> gaussian_lowpass(const Tensor<T>& x, std::size_t k);

template <typename T>
struct Decomposition {
  Tensor<T> low;
  Tensor<T> high;
};

template <typename T>
Decomposition<T> decompose(const Tensor<T>& x, std::size_t k);

// Squeeze-excite logits (before the sigmoid), shaped (B, C, 1, 1, 1).
template <typename T>
Tensor<T> channel_attention(const Tensor<T>& x, const SemState<T>& state);

template <typename T>
Tensor<T> refine_high(const Tensor<T>& x_high, const SemState<T>& state);

template <typename T>
Tensor<T> sem_forward(const Tensor<T>& x, const SemState<T>& state);

}  // namespace lsef
