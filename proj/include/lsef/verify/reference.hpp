#pragma once

// Fixtures shared by the optimizer tests and the acceptance checks: a
// small two-layer regression network and a reference two-phase
// sharpness-aware step written without the optimizer classes.

#include <cstdint>

#include "lsef/module.hpp"
#include "lsef/rao.hpp"
#include "lsef/tensor.hpp"

namespace lsef::reference {

// y = W2 relu(W1 x + b1) + b2 on a fixed random batch, mean squared error.
struct TwoLayerNet {
  Tensor64 w1, b1, w2, b2;  // (hidden, in), (hidden), (out, hidden), (out)
  Tensor64 x, y;            // (batch, in), (batch, out)

  static TwoLayerNet make(std::uint64_t seed, std::size_t in = 5, std::size_t hidden = 6, std::size_t out = 3,
                          std::size_t batch = 12);
  // Deep copy with fresh trainable leaves.
  TwoLayerNet clone() const;
  ParameterList<double> parameters() const;
  Tensor64 loss() const;
};

// W' = W + rho * g / ||g|| per tensor, gradient at W', then W -= lr * g'.
void sam_step(const ParameterList<double>& params, const LossFn<double>& loss, double rho, double lr);

// Largest elementwise difference across two parameter lists.
double max_param_diff(const ParameterList<double>& a, const ParameterList<double>& b);
// True when every parameter value agrees bit for bit.
bool bitwise_equal(const ParameterList<double>& a, const ParameterList<double>& b);

}  // namespace lsef::reference
