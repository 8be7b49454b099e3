#pragma once

// Five stacked configurations trained on one fixed pair of synthetic
// splits: base, +SEM, +SEM+DDM, +SEM+DDM+CIM, and the full stack with the
// rank-aware optimizer. Each row is averaged over several training seeds.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lsef/datagen.hpp"
#include "lsef/train.hpp"

namespace lsef {

struct AblationConfig {
  DatasetSpec data;                  // training split
  std::uint64_t heldout_seed = 1007;  // held-out split: same spec, this seed
  std::size_t heldout_n = 70;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  TrainConfig train;  // modules and optimizer kind are overridden per row

  void validate() const;
  // The desk-scale benchmark used by the acceptance checks.
  static AblationConfig standard();
};

struct AblationRun {
  std::uint64_t seed = 0;
  MetricsBundle train, heldout;
  std::uint64_t train_hash = 0, heldout_hash = 0;
  double seconds = 0;
};

struct AblationRow {
  std::string name;     // "base", "+SEM", ...
  std::string modules;  // "none" or a list
  OptimizerKind optimizer = OptimizerKind::base;
  std::vector<AblationRun> runs;

  double mean_train_war() const;
  double mean_train_uar() const;
  double mean_heldout_war() const;
  double mean_heldout_uar() const;
  double mean_heldout_rmse() const;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  // True when every run saw the same train and held-out content hashes.
  bool splits_identical() const;
  std::string table() const;  // aligned text
  std::string csv() const;    // one line per (row, seed)
};

// The five stacked rows in order.
std::vector<AblationRow> ablation_rows();

// Progress lines go to `log` when given.
AblationResult run_ablation(const AblationConfig& cfg, std::ostream* log = nullptr);

}  // namespace lsef
