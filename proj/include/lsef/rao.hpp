#pragma once

// Rank-aware two-phase sharpness optimizer. Each tensor is perturbed along
// its own normalized gradient by a radius scaled by how many large
// singular values it carries and shrunk by how many near-zero entries it
// has; the base optimizer then applies the gradient taken at the
// perturbed point to the original weights.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lsef/module.hpp"
#include "lsef/tensor.hpp"

namespace lsef {

struct RaoConfig {
  double rho_base = 0.05;
  double alpha = 0.5;
  double beta = 0.5;
  double gamma = 0.1;
  double tau_r_rel = 0.01;
  double tau_s_rel = 0.1;
  double rho_min = 1e-4;
  double rho_max = 0.5;
  // Matricized extents above this reuse the cached spectrum between
  // refreshes every svd_refresh steps.
  std::size_t svd_dense_limit = 4096;
  std::size_t svd_refresh = 10;

  void validate() const;
};

// Gradient norms below this skip both the perturbation and the update.
inline constexpr double kGradFloor = 1e-12;

struct RankSensitivity {
  double rho = 0.0;
  double threshold = 0.0;
  std::vector<double> spectrum;  // empty when the SVD was skipped
};

// Tensors of rank <= 1 or fewer than 8 entries skip the SVD and report 1
// when any entry is non-zero, else 0.
template <typename T>
RankSensitivity rank_sensitivity(const Tensor<T>& w, double tau_r_rel);

// Same as above from a precomputed spectrum.
RankSensitivity rank_sensitivity_from_spectrum(std::vector<double> spectrum, double tau_r_rel);

struct SparsitySensitivity {
  double rho = 0.0;
  double threshold = 0.0;
};

template <typename T>
SparsitySensitivity sparsity_sensitivity(const Tensor<T>& w, double tau_s_rel);

double dynamic_radius(double rho_base, double rho_r, double rho_s, double alpha, double beta);

struct TensorSensitivity {
  std::string name;
  double rho_r = 0, rho_s = 0, rho_dyn = 0;
  double tau_r = 0, tau_s = 0;
  std::vector<double> singular_values;
  bool spectrum_cached = false;
  double grad_norm = 0;
  double perturbation_norm = 0;  // measured ||W' - W||_F
  bool perturbed = false;
};

struct SensitivityReport {
  std::size_t step = 0;
  double loss = 0;            // L at W
  double loss_perturbed = 0;  // L' at W'
  double rho_base = 0;        // radius used for this step
  double delta = 0;
  std::vector<TensorSensitivity> tensors;

  double mean_rho_r() const;
  double mean_rho_s() const;
  double mean_rho_dyn() const;
  // One "key=value ..." line per tensor.
  std::string to_lines() const;
};

enum class BaseKind { sgd, adam };

struct BaseConfig {
  BaseKind kind = BaseKind::sgd;
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Plain descent or Adam. Adam keeps a per-tensor step count, so a tensor
// that is skipped in a step does not advance its bias correction.
template <typename T>
class BaseOptimizer {
 public:
  BaseOptimizer(ParameterList<T> params, BaseConfig cfg);

  // Updates tensor i in place from the gradient g.
  void update(std::size_t i, std::span<const T> g);
  void update_all(const std::vector<std::vector<T>>& grads);

  const ParameterList<T>& params() const { return params_; }
  const BaseConfig& config() const { return cfg_; }
  // Changes the step size only; moments and step counts are kept.
  void set_lr(double lr);

 private:
  ParameterList<T> params_;
  BaseConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<std::uint64_t> steps_;
};

enum class OptimizerKind { base, sam, rao };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);
const char* to_string(BaseKind kind);
BaseKind parse_base_kind(const std::string& text);

// Builds the loss from the current parameter values.
template <typename T>
using LossFn = std::function<Tensor<T>()>;

template <typename T>
class RankAwareOptimizer {
 public:
  // kind == sam forces alpha = beta = gamma = 0.
  RankAwareOptimizer(ParameterList<T> params, OptimizerKind kind, BaseConfig base, RaoConfig cfg = {});

  // One step; returns L at the pre-step weights.
  double step(const LossFn<T>& loss_fn);

  const SensitivityReport& last_report() const { return report_; }
  double rho_base() const { return rho_base_; }
  void set_lr(double lr) { base_.set_lr(lr); }
  double lr() const { return base_.config().lr; }
  OptimizerKind kind() const { return kind_; }
  const RaoConfig& config() const { return cfg_; }
  std::size_t steps_taken() const { return step_; }

 private:
  double evaluate(const LossFn<T>& loss_fn, std::vector<std::vector<T>>& grads, const char* phase);
  void analyse(SensitivityReport& report);

  ParameterList<T> params_;
  OptimizerKind kind_;
  RaoConfig cfg_;
  BaseOptimizer<T> base_;
  double rho_base_;
  std::size_t step_ = 0;
  std::map<std::string, std::vector<double>> spectrum_cache_;
  SensitivityReport report_;
};

}  // namespace lsef
