#include "lsef/rao.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lsef/error.hpp"
#include "lsef/linalg.hpp"

namespace lsef {

void RaoConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(rho_base) && finite(alpha) && finite(beta) && finite(gamma) && finite(tau_r_rel) &&
              finite(tau_s_rel) && finite(rho_min) && finite(rho_max),
          ErrorKind::configuration, "RAO settings must be finite");
  require(rho_min >= 0 && rho_min <= rho_base && rho_base <= rho_max, ErrorKind::configuration,
          "RAO radius bounds need 0 <= rho_min <= rho_base <= rho_max");
  require(alpha >= 0 && beta >= 0, ErrorKind::configuration, "RAO alpha and beta must be >= 0");
  require(tau_r_rel >= 0 && tau_s_rel >= 0, ErrorKind::configuration,
          "RAO thresholds must be non-negative");
  require(svd_refresh >= 1, ErrorKind::configuration, "svd_refresh must be >= 1");
}

namespace {

template <typename T>
bool skips_svd(const Tensor<T>& w) {
  return w.rank() <= 1 || w.numel() < 8;
}

template <typename T>
bool any_nonzero(const Tensor<T>& w) {
  for (T v : w.data())
    if (v != T(0)) return true;
  return false;
}

template <typename T>
std::vector<double> spectrum_of(const Tensor<T>& w) {
  return svd_values(w);
}

}  // namespace

RankSensitivity rank_sensitivity_from_spectrum(std::vector<double> spectrum, double tau_r_rel) {
  RankSensitivity out;
  out.spectrum = std::move(spectrum);
  if (out.spectrum.empty() || out.spectrum.front() == 0.0) return out;
  out.threshold = tau_r_rel * out.spectrum.front();
  const auto above = std::count_if(out.spectrum.begin(), out.spectrum.end(),
                                   [&](double s) { return s > out.threshold; });
  out.rho = static_cast<double>(above) / static_cast<double>(out.spectrum.size());
  return out;
}

template <typename T>
RankSensitivity rank_sensitivity(const Tensor<T>& w, double tau_r_rel) {
  require(w.numel() > 0, ErrorKind::usage, "rank sensitivity of an empty tensor");
  if (skips_svd(w)) {
    RankSensitivity out;
    out.rho = any_nonzero(w) ? 1.0 : 0.0;
    return out;
  }
  return rank_sensitivity_from_spectrum(spectrum_of(w), tau_r_rel);
}

template <typename T>
SparsitySensitivity sparsity_sensitivity(const Tensor<T>& w, double tau_s_rel) {
  require(w.numel() > 0, ErrorKind::usage, "sparsity sensitivity of an empty tensor");
  double peak = 0;
  for (T v : w.data()) peak = std::max(peak, std::abs(static_cast<double>(v)));
  SparsitySensitivity out;
  if (peak == 0.0) {
    out.rho = 1.0;
    return out;
  }
  out.threshold = tau_s_rel * peak;
  std::size_t below = 0;
  for (T v : w.data())
    if (std::abs(static_cast<double>(v)) < out.threshold) ++below;
  out.rho = static_cast<double>(below) / static_cast<double>(w.numel());
  return out;
}

double dynamic_radius(double rho_base, double rho_r, double rho_s, double alpha, double beta) {
  return std::max(0.0, rho_base * (1.0 + alpha * rho_r - beta * rho_s));
}

namespace {

double mean_of(const std::vector<TensorSensitivity>& ts, double TensorSensitivity::*field) {
  if (ts.empty()) return 0.0;
  double s = 0;
  for (const auto& t : ts) s += t.*field;
  return s / static_cast<double>(ts.size());
}

}  // namespace

double SensitivityReport::mean_rho_r() const { return mean_of(tensors, &TensorSensitivity::rho_r); }
double SensitivityReport::mean_rho_s() const { return mean_of(tensors, &TensorSensitivity::rho_s); }
double SensitivityReport::mean_rho_dyn() const { return mean_of(tensors, &TensorSensitivity::rho_dyn); }

std::string SensitivityReport::to_lines() const {
  std::ostringstream os;
  char buf[512];
  for (const auto& t : tensors) {
    std::snprintf(buf, sizeof buf,
                  "record=sensitivity step=%zu tensor=%s rho_r=%.17g rho_s=%.17g rho_dyn=%.17g "
                  "tau_r=%.17g tau_s=%.17g n_sv=%zu cached=%d perturbed=%d L=%.17g L_perturbed=%.17g\n",
                  step, t.name.c_str(), t.rho_r, t.rho_s, t.rho_dyn, t.tau_r, t.tau_s,
                  t.singular_values.size(), t.spectrum_cached ? 1 : 0, t.perturbed ? 1 : 0, loss,
                  loss_perturbed);
    os << buf;
  }
  return os.str();
}

template <typename T>
BaseOptimizer<T>::BaseOptimizer(ParameterList<T> params, BaseConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  require(std::isfinite(cfg_.lr) && cfg_.lr > 0, ErrorKind::configuration, "learning rate must be > 0");
  if (cfg_.kind == BaseKind::adam) {
    require(cfg_.beta1 >= 0 && cfg_.beta1 < 1 && cfg_.beta2 >= 0 && cfg_.beta2 < 1 && cfg_.epsilon > 0,
            ErrorKind::configuration, "Adam needs beta1, beta2 in [0, 1) and epsilon > 0");
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  steps_.assign(params_.size(), 0);
}

template <typename T>
void BaseOptimizer<T>::set_lr(double lr) {
  require(std::isfinite(lr) && lr > 0, ErrorKind::configuration, "learning rate must be > 0");
  cfg_.lr = lr;
}

template <typename T>
void BaseOptimizer<T>::update(std::size_t i, std::span<const T> g) {
  auto w = params_[i].tensor.mutable_data();
  require(g.size() == w.size(), ErrorKind::optimizer, "gradient size mismatch for " + params_[i].name);
  ++steps_[i];
  if (cfg_.kind == BaseKind::sgd) {
    const T lr = static_cast<T>(cfg_.lr);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
    return;
  }
  auto& m = m_[i];
  auto& v = v_[i];
  const double t = static_cast<double>(steps_[i]);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double gj = static_cast<double>(g[j]);
    m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
    v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
    const double step = cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.epsilon);
    w[j] = static_cast<T>(static_cast<double>(w[j]) - step);
  }
}

template <typename T>
void BaseOptimizer<T>::update_all(const std::vector<std::vector<T>>& grads) {
  for (std::size_t i = 0; i < params_.size(); ++i) update(i, grads[i]);
}

const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::base: return "base";
    case OptimizerKind::sam: return "sam";
    case OptimizerKind::rao: return "rao";
  }
  return "?";
}

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "base") return OptimizerKind::base;
  if (text == "sam") return OptimizerKind::sam;
  if (text == "rao") return OptimizerKind::rao;
  fail(ErrorKind::configuration, "unknown optimizer '" + text + "' (base, sam, rao)");
}

const char* to_string(BaseKind kind) { return kind == BaseKind::sgd ? "sgd" : "adam"; }

BaseKind parse_base_kind(const std::string& text) {
  if (text == "sgd") return BaseKind::sgd;
  if (text == "adam") return BaseKind::adam;
  fail(ErrorKind::configuration, "unknown base optimizer '" + text + "' (sgd, adam)");
}

template <typename T>
RankAwareOptimizer<T>::RankAwareOptimizer(ParameterList<T> params, OptimizerKind kind, BaseConfig base,
                                          RaoConfig cfg)
    : params_(params), kind_(kind), cfg_(cfg), base_(std::move(params), base), rho_base_(cfg.rho_base) {
  if (kind_ == OptimizerKind::sam) cfg_.alpha = cfg_.beta = cfg_.gamma = 0.0;
  cfg_.validate();
  for (const auto& p : params_)
    require(p.tensor.is_leaf() && p.tensor.requires_grad(), ErrorKind::configuration,
            "optimizer parameter " + p.name + " must be a trainable leaf");
}

template <typename T>
double RankAwareOptimizer<T>::evaluate(const LossFn<T>& loss_fn, std::vector<std::vector<T>>& grads,
                                       const char* phase) {
  for (auto& p : params_) p.tensor.zero_grad();
  Tensor<T> loss = loss_fn();
  require(loss.numel() == 1, ErrorKind::usage, "loss must be a scalar");
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) {
    report_.loss = value;
    fail(ErrorKind::optimizer, std::string("non-finite loss in the ") + phase + " phase at step " +
                                   std::to_string(step_));
  }
  loss.backward();
  grads.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& t = params_[i].tensor;
    if (t.has_grad()) {
      grads[i].assign(t.grad().begin(), t.grad().end());
    } else {
      grads[i].assign(t.numel(), T(0));
    }
    for (T g : grads[i])
      if (!std::isfinite(static_cast<double>(g)))
        fail(ErrorKind::optimizer, std::string("non-finite gradient for ") + params_[i].name + " in the " +
                                       phase + " phase at step " + std::to_string(step_));
  }
  return value;
}

template <typename T>
void RankAwareOptimizer<T>::analyse(SensitivityReport& report) {
  report.tensors.clear();
  for (const auto& p : params_) {
    TensorSensitivity ts;
    ts.name = p.name;
    const auto& w = p.tensor;
    RankSensitivity rs;
    if (skips_svd(w)) {
      rs = rank_sensitivity(w, cfg_.tau_r_rel);
    } else {
      const auto [rows, cols] = matricize(w.shape());
      const bool dense = std::max(rows, cols) <= cfg_.svd_dense_limit;
      auto cached = spectrum_cache_.find(p.name);
      if (!dense && cached != spectrum_cache_.end() && step_ % cfg_.svd_refresh != 0) {
        rs = rank_sensitivity_from_spectrum(cached->second, cfg_.tau_r_rel);
        ts.spectrum_cached = true;
      } else {
        rs = rank_sensitivity_from_spectrum(spectrum_of(w), cfg_.tau_r_rel);
        if (!dense) spectrum_cache_[p.name] = rs.spectrum;
      }
    }
    const auto ss = sparsity_sensitivity(w, cfg_.tau_s_rel);
    ts.rho_r = rs.rho;
    ts.tau_r = rs.threshold;
    ts.singular_values = std::move(rs.spectrum);
    ts.rho_s = ss.rho;
    ts.tau_s = ss.threshold;
    ts.rho_dyn = dynamic_radius(rho_base_, ts.rho_r, ts.rho_s, cfg_.alpha, cfg_.beta);
    report.tensors.push_back(std::move(ts));
  }
}

template <typename T>
double RankAwareOptimizer<T>::step(const LossFn<T>& loss_fn) {
  report_ = SensitivityReport{};
  report_.step = step_;
  report_.rho_base = rho_base_;
  std::vector<std::vector<T>> g1;

  if (kind_ == OptimizerKind::base) {
    report_.loss = report_.loss_perturbed = evaluate(loss_fn, g1, "base");
    base_.update_all(g1);
    ++step_;
    return report_.loss;
  }

  analyse(report_);
  const double loss = evaluate(loss_fn, g1, "first");
  report_.loss = loss;

  std::vector<std::vector<T>> saved(params_.size());
  std::vector<bool> active(params_.size(), false);
  bool any_perturbed = false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& ts = report_.tensors[i];
    double sq = 0;
    for (T g : g1[i]) sq += static_cast<double>(g) * static_cast<double>(g);
    ts.grad_norm = std::sqrt(sq);
    if (ts.grad_norm < kGradFloor) continue;
    active[i] = true;
    if (ts.rho_dyn == 0.0) continue;
    auto w = params_[i].tensor.mutable_data();
    saved[i].assign(w.begin(), w.end());
    const double s = ts.rho_dyn / ts.grad_norm;
    double moved = 0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] = static_cast<T>(static_cast<double>(w[j]) + s * static_cast<double>(g1[i][j]));
      const double d = static_cast<double>(w[j]) - static_cast<double>(saved[i][j]);
      moved += d * d;
    }
    ts.perturbation_norm = std::sqrt(moved);
    ts.perturbed = true;
    any_perturbed = true;
  }

  double loss_p = loss;
  std::vector<std::vector<T>> g2;
  if (any_perturbed) {
    try {
      loss_p = evaluate(loss_fn, g2, "second");
    } catch (...) {
      for (std::size_t i = 0; i < params_.size(); ++i)
        if (!saved[i].empty()) std::copy(saved[i].begin(), saved[i].end(), params_[i].tensor.mutable_data().begin());
      throw;
    }
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (!saved[i].empty()) std::copy(saved[i].begin(), saved[i].end(), params_[i].tensor.mutable_data().begin());
  } else {
    g2 = std::move(g1);
  }
  report_.loss_perturbed = loss_p;

  for (std::size_t i = 0; i < params_.size(); ++i)
    if (active[i]) base_.update(i, g2[i]);

  const double delta = std::clamp((loss_p - loss) / std::max(std::abs(loss), 1e-8), -1.0, 1.0);
  report_.delta = delta;
  rho_base_ = std::clamp(rho_base_ * (1.0 + cfg_.gamma * delta), cfg_.rho_min, cfg_.rho_max);
  ++step_;
  return loss;
}

template RankSensitivity rank_sensitivity(const Tensor<float>&, double);
template RankSensitivity rank_sensitivity(const Tensor<double>&, double);
template SparsitySensitivity sparsity_sensitivity(const Tensor<float>&, double);
template SparsitySensitivity sparsity_sensitivity(const Tensor<double>&, double);
template class BaseOptimizer<float>;
template class BaseOptimizer<double>;
template class RankAwareOptimizer<float>;
template class RankAwareOptimizer<double>;

}  // namespace lsef
