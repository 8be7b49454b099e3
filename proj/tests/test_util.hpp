#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lsef/gradcheck.hpp"
#include "lsef/tensor.hpp"

namespace lsef::tu {

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  return max_abs_diff(a.data(), b.data());
}

inline Tensor64 param(const Shape& s, std::uint64_t seed, const std::string& tag) {
  auto t = random_tensor(s, seed, tag);
  t.set_requires_grad(true);
  return t;
}

}  // namespace lsef::tu
