#pragma once

// Explicit-loop reference implementations. They read parameters as flat
// arrays and never call the tensor ops, so they check the ops rather than
// restate them.

#include <span>
#include <vector>

#include "lsef/cim.hpp"
#include "lsef/ddm.hpp"
#include "lsef/tensor.hpp"

namespace lsef::oracle {

// Row-major (n, k) times (k, m).
std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n,
                           std::size_t k, std::size_t m);

// Routing gate (B, T) of the decoupling module.
std::vector<double> ddm_gate(const Tensor64& x, const DdmState<double>& s);

struct Graph {
  std::vector<double> out;       // (B, C', T, H, W)
  std::vector<double> affinity;  // (groups, N, N), row-stochastic
};

// Per-frame spatial graph over normalized projections, (B, C_g, T, H, W).
Graph ddm_graph(const Tensor64& x_routed, const DdmState<double>& s);

// One depthwise branch with mirror padding (no edge repeat).
std::vector<double> depthwise_reflect(const Tensor64& x, const Tensor64& kernel);

// Branches, channel concat and pointwise fusion.
std::vector<double> cim_multiscale(const Tensor64& x, const CimState<double>& s);

// Temporal attention weights (B, T).
std::vector<double> cim_attention(const Tensor64& x_ms, const CimState<double>& s);

// Residual non-local graph over all T*H*W positions.
Graph cim_nonlocal(const Tensor64& x_ta, const CimState<double>& s);

double max_abs_diff(const std::vector<double>& a, std::span<const double> b);

}  // namespace lsef::oracle
