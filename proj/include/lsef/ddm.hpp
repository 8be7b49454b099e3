#pragma once

// Dynamic decoupling: a per-frame routing gate, a per-frame spatial graph
// over L2-normalized dual projections, and a 1x1x1 fusion of the local,
// graph and global-context subspaces.

#include <cstdint>

#include "lsef/module.hpp"
#include "lsef/tensor.hpp"

namespace lsef {

template <typename T>
struct DdmState {
  std::size_t channels = 0;
  std::size_t frames = 0;          // T
  std::size_t graph_channels = 0;  // C_g = max(1, C / 2)
  Tensor<T> w1, w2;                // (T, T)
  Tensor<T> phi_g, phi_o;          // (C_g, C, 1, 1, 1)
  Tensor<T> theta_local;           // (C, 1, 3, 3, 3) depthwise
  Tensor<T> theta_global;          // (C, C, 1, 1, 1)
  Tensor<T> psi_fuse;              // (C, 2C + C_g, 1, 1, 1)
  std::uint64_t init_seed = 0;

  static DdmState init(std::size_t channels, std::size_t frames, std::uint64_t seed);
  ParameterList<T> parameters(const std::string& prefix = "ddm.") const;
};

template <typename T>
struct TemporalGate {
  Tensor<T> routed;  // x * g broadcast over (C, H, W)
  Tensor<T> gate;    // (B, T)
};

template <typename T>
TemporalGate<T> temporal_gate(const Tensor<T>& x, const DdmState<T>& state);

template <typename T>
struct GraphInteraction {
  Tensor<T> out;       // (B, C_g, T, H, W)
  Tensor<T> g_hat;     // (B*T, C_g, N), unit columns
  Tensor<T> o_hat;     // (B*T, C_g, N), unit columns
  Tensor<T> affinity;  // (B*T, N, N), row-stochastic
};

template <typename T>
GraphInteraction<T> graph_interact_detailed(const Tensor<T>& x_routed, const DdmState<T>& state);

template <typename T>
Tensor<T> graph_interact(const Tensor<T>& x_routed, const DdmState<T>& state) {
  return graph_interact_detailed(x_routed, state).out;
}

template <typename T>
Tensor<T> ddm_forward(const Tensor<T>& x, const DdmState<T>& state);

// Mean |<g_col, o_col>| over all nodes; 0 means the two projections are
// orthogonal node by node.
template <typename T>
double projection_overlap(const GraphInteraction<T>& g);

}  // namespace lsef
