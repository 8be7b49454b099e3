#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lsef/tensor.hpp"

namespace lsef {

struct SvdOptions {
  int max_sweeps = 100;
  // Pair (p, q) counts as orthogonal once |<u_p,u_q>| <= tol * |u_p| |u_q|.
  double tolerance = 1e-10;
};

struct SvdDiagnostics {
  int sweeps = 0;
  double max_off_diagonal = 0.0;
};

// Singular values of a row-major rows x cols matrix by one-sided Jacobi
// over the smaller dimension. Non-negative, non-increasing, length
// min(rows, cols). Throws a numerical error if the sweep cap is reached.
std::vector<double> singular_values(std::span<const double> matrix, std::size_t rows,
                                    std::size_t cols, const SvdOptions& opts = {},
                                    SvdDiagnostics* diag = nullptr);

// Matrix view of a k-way tensor: first axis by the product of the rest.
// Rank-0 and rank-1 tensors map to a single row.
std::pair<std::size_t, std::size_t> matricize(const Shape& shape);

template <typename T>
std::vector<double> svd_values(const Tensor<T>& m, const SvdOptions& opts = {});

}  // namespace lsef
