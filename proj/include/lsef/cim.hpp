#pragma once

// Consistency integration: multi-scale depthwise branches fused by a
// pointwise kernel, a per-frame sigmoid recalibration driven by a short
// temporal convolution, and a residual non-local graph over all
// spatiotemporal positions.

#include <array>
#include <cstdint>
#include <vector>

#include "lsef/module.hpp"
#include "lsef/tensor.hpp"

namespace lsef {

struct CimConfig {
  // (kt, kh, kw) per branch; every extent odd.
  std::vector<std::array<std::size_t, 3>> scales{{1, 1, 1}, {3, 3, 3}, {3, 5, 5}};
  std::size_t max_nodes = 4096;
};

template <typename T>
struct CimState {
  std::size_t channels = 0;
  std::size_t attn_channels = 0;  // C_a = max(1, C / 2)
  std::vector<std::array<std::size_t, 3>> scales;
  std::vector<Tensor<T>> scale_kernels;  // (C, 1, kt, kh, kw) each
  Tensor<T> fuse_kernel;                 // (C, K*C, 1, 1, 1)
  Tensor<T> temp_weight;                 // (1, 1, 3, 1, 1)
  Tensor<T> temp_bias;                   // (1)
  Tensor<T> theta_proj, phi_proj;        // (C_a, C, 1, 1, 1)
  Tensor<T> graph_out;                   // (C, C_a, 1, 1, 1)
  Tensor<T> residual_scale;              // (1)
  std::size_t max_nodes = 4096;
  std::uint64_t init_seed = 0;

  static CimState init(std::size_t channels, std::uint64_t seed, const CimConfig& cfg = {});
  ParameterList<T> parameters(const std::string& prefix = "cim.") const;
};

template <typename T>
Tensor<T> multiscale(const Tensor<T>& x, const CimState<T>& state);

// Attention weights (B, T), each in (0, 1).
template <typename T>
Tensor<T> temporal_attention(const Tensor<T>& x_ms, const CimState<T>& state);

template <typename T>
Tensor<T> temporal_recalibrate(const Tensor<T>& x_ms, const CimState<T>& state);

template <typename T>
struct NonlocalGraph {
  Tensor<T> out;       // same shape as the input
  Tensor<T> affinity;  // (B, M, M), row-stochastic
  Tensor<T> values;    // (B, C_a, M)
};

template <typename T>
NonlocalGraph<T> nonlocal_graph_detailed(const Tensor<T>& x_ta, const CimState<T>& state);

template <typename T>
Tensor<T> nonlocal_graph(const Tensor<T>& x_ta, const CimState<T>& state) {
  return nonlocal_graph_detailed(x_ta, state).out;
}

template <typename T>
Tensor<T> cim_forward(const Tensor<T>& x, const CimState<T>& state);

}  // namespace lsef
