#pragma once

// Mini-batch training and evaluation of the backbone. Everything that
// reaches the metric log is a pure function of (data, config, seed), so two
// runs of the same manifest produce the same bytes.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lsef/backbone.hpp"
#include "lsef/config.hpp"
#include "lsef/datagen.hpp"
#include "lsef/metrics.hpp"
#include "lsef/rao.hpp"
#include "lsef/serialize.hpp"

namespace lsef {

enum class Precision { f32, f64 };

// constant: every epoch uses optimizer.lr. cosine: epoch e of E uses
// lr * (f + (1 - f) * (1 + cos(pi * (e - 1) / (E - 1))) / 2), f = lr_floor.
enum class LrSchedule { constant, cosine };

const char* to_string(LrSchedule s);
LrSchedule parse_schedule(const std::string& text);

const char* to_string(Precision p);
Precision parse_precision(const std::string& text);

struct TrainConfig {
  BackboneConfig model;
  OptimizerKind optimizer = OptimizerKind::base;
  BaseConfig base{BaseKind::adam, 0.01};
  RaoConfig rao;
  std::size_t epochs = 60;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
  Precision precision = Precision::f32;
  LrSchedule schedule = LrSchedule::constant;
  double lr_floor = 0.1;  // final lr as a fraction of optimizer.lr (cosine)

  void validate() const;
  double lr_at(std::size_t epoch) const;  // 1-based
  // Flat keys: model.*, train.*, optimizer.*, rao.*
  ConfigMap to_config() const;
  static TrainConfig from_config(const ConfigMap& cfg);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;  // mean step loss at the pre-step weights
  double lr = 0;
  MetricsBundle train;
  std::optional<MetricsBundle> heldout;
  double mean_rho_r = 0, mean_rho_s = 0, mean_rho_dyn = 0, rho_base = 0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  MetricsBundle final_train;
  std::optional<MetricsBundle> final_heldout;
  io::Archive checkpoint;
  std::uint64_t train_hash = 0, heldout_hash = 0;  // content of the splits consumed
  std::string log;  // the exact metric log written to the sink
};

// Called after each epoch is logged; returning false ends training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

// Adapts the model extents to the dataset, then trains. Each log line is
// also streamed to `sink` when given.
TrainResult train_model(const Dataset& train_set, const Dataset* heldout, TrainConfig cfg,
                        std::ostream* sink = nullptr, const EpochCallback& on_epoch = {});

template <typename T>
MetricsBundle evaluate_model(const Dataset& d, const BackboneConfig& cfg, const BackboneState<T>& state,
                             std::size_t batch = 16);

// Evaluates a checkpoint in the precision it was saved in.
MetricsBundle evaluate_checkpoint(const io::Archive& checkpoint, const Dataset& d, std::size_t batch = 16);

// Copies extents, task and class count from the dataset.
void fit_model_to_data(BackboneConfig& model, const DatasetSpec& spec);

}  // namespace lsef
