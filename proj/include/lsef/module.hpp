#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsef/tensor.hpp"

namespace lsef {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParameterList = std::vector<NamedTensor<T>>;

// U(-sqrt(3/fan_in), sqrt(3/fan_in)) from a stream keyed by (seed, name),
// so adding or removing a block never shifts another block's init.
template <typename T>
Tensor<T> uniform_fan_in(Shape shape, std::size_t fan_in, std::uint64_t seed,
                         const std::string& name);

// Depthwise kernel (C, 1, kt, kh, kw) with 1 at the center tap.
template <typename T>
Tensor<T> identity_depthwise(std::size_t channels, std::size_t kt, std::size_t kh, std::size_t kw);

template <typename T>
Tensor<T> parameter(Tensor<T> t) {
  t.set_requires_grad(true);
  return t;
}

}  // namespace lsef
