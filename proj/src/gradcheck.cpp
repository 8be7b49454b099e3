#include "lsef/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lsef/ops.hpp"
#include "lsef/random.hpp"

namespace lsef {

Tensor64 random_tensor(const Shape& shape, std::uint64_t seed, const std::string& tag) {
  Rng r(mix_seed(seed, tag));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = r.uniform(-1.0, 1.0);
  return Tensor64::from(shape, std::move(v));
}

Tensor64 weighted_sum(const Tensor64& out, std::uint64_t seed) {
  return sum(mul(out, random_tensor(out.shape(), seed, "loss-weights")));
}

std::vector<GradCheckResult> gradient_check(const std::function<Tensor64()>& loss,
                                            const ParameterList<double>& inputs,
                                            const GradCheckOptions& opts) {
  for (auto p : inputs) p.tensor.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : inputs) {
    if (p.tensor.has_grad())
      analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    else
      analytic.emplace_back(p.tensor.numel(), 0.0);
  }

  NoGradGuard no_grad;
  Rng rng(mix_seed(opts.seed, "gradcheck"));
  std::vector<GradCheckResult> results;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto tensor = inputs[t].tensor;
    GradCheckResult res;
    res.name = inputs[t].name;
    const std::size_t n = tensor.numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords > 0 && n > opts.max_coords) {
      for (std::size_t i = 0; i < opts.max_coords; ++i) std::swap(coords[i], coords[i + rng.below(n - i)]);
      coords.resize(opts.max_coords);
    }
    auto w = tensor.mutable_data();
    for (std::size_t idx : coords) {
      const double orig = w[idx];
      w[idx] = orig + opts.step;
      const double lp = loss().item();
      w[idx] = orig - opts.step;
      const double lm = loss().item();
      w[idx] = orig;
      const double numeric = (lp - lm) / (2.0 * opts.step);
      const double a = analytic[t][idx];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++res.checked;
      if (res.checked == 1 || rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_index = idx;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
    res.passed = res.max_rel_error < opts.tolerance;
    results.push_back(std::move(res));
  }
  return results;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::string describe(const std::vector<GradCheckResult>& results) {
  std::string out;
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%s %s coords=%zu max_rel=%.3e worst@%zu analytic=%.9g numeric=%.9g\n",
                  r.passed ? "ok  " : "FAIL", r.name.c_str(), r.checked, r.max_rel_error, r.worst_index,
                  r.worst_analytic, r.worst_numeric);
    out += buf;
  }
  return out;
}

}  // namespace lsef
