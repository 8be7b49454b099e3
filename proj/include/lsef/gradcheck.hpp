#pragma once

// Central-difference gradient checking in 64-bit.
// rel = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lsef/module.hpp"
#include "lsef/tensor.hpp"

namespace lsef {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Coordinates probed per tensor; 0 probes every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  bool passed = true;
};

// `loss` must rebuild the scalar from the current values of `inputs`,
// which are perturbed in place and restored exactly.
std::vector<GradCheckResult> gradient_check(const std::function<Tensor64()>& loss,
                                            const ParameterList<double>& inputs,
                                            const GradCheckOptions& opts = {});

bool all_passed(const std::vector<GradCheckResult>& results);
// Names, coordinate counts and worst errors, one tensor per line.
std::string describe(const std::vector<GradCheckResult>& results);

// sum(out * w) with a fixed pseudo-random weight tensor, so every output
// coordinate contributes a distinct sensitivity.
Tensor64 weighted_sum(const Tensor64& out, std::uint64_t seed);

// U(-1, 1) entries from (seed, tag).
Tensor64 random_tensor(const Shape& shape, std::uint64_t seed, const std::string& tag = "x");

}  // namespace lsef
