#pragma once

#include <cstddef>
#include <vector>

#include "lsef/error.hpp"
#include "lsef/tensor.hpp"

namespace lsef::detail {

inline std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

// Strides of `shape` viewed inside `target`, with 0 on broadcast axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& target) {
  auto s = contiguous_strides(shape);
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (shape[i] == 1 && target[i] != 1) s[i] = 0;
  return s;
}

// Calls f(flat, offset_a, offset_b) for every position of `shape`, walking
// the two operand views with the given strides.
template <typename F>
void for_each_index2(const Shape& shape, const std::vector<std::size_t>& sa,
                     const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t rank = shape.size();
  const std::size_t total = numel(shape);
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  const std::size_t inner = shape[rank - 1];
  const std::size_t ia = sa[rank - 1], ib = sb[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t flat = 0; flat < total; flat += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(flat + j, oa + j * ia, ob + j * ib);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < shape[d]) break;
      oa -= sa[d] * shape[d];
      ob -= sb[d] * shape[d];
      idx[d] = 0;
    }
  }
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  require(a.size() == b.size(), ErrorKind::dimension,
          std::string(op) + ": rank mismatch " + to_string(a) + " vs " + to_string(b));
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      out[i] = a[i];
    } else if (a[i] == 1) {
      out[i] = b[i];
    } else {
      fail(ErrorKind::dimension,
           std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
  }
  return out;
}

// (outer, axis, inner) factorization around one axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  require(axis < shape.size(), ErrorKind::dimension,
          "axis " + std::to_string(axis) + " out of range for " + to_string(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace lsef::detail
