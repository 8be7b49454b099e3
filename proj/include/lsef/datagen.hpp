#pragma once

// Synthetic affect clips: a low-rank spatiotemporal base (smooth temporal
// profiles times Gaussian spatial blobs) plus a few single-frame localized
// bursts plus Gaussian noise. Categorical clips draw the base from a fixed
// per-class template; regression clips encode a valence/arousal trajectory
// in two fixed spatial patterns.

#include <cstdint>
#include <string>
#include <vector>

#include "lsef/backbone.hpp"
#include "lsef/tensor.hpp"

namespace lsef {

struct DatasetSpec {
  Head task = Head::categorical;
  std::size_t n = 210;
  std::uint64_t seed = 7;
  double noise = 0.05;
  double imbalance = 0.0;  // 0 = balanced, else geometric class ratio in (0, 1)
  std::size_t channels = 3;
  std::size_t frames = 8;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t classes = 7;

  void validate() const;
};

inline constexpr std::size_t kBaseRank = 3;
inline constexpr std::size_t kMaxBursts = 3;

struct SequenceSample {
  Tensor64 features;               // (C0, T, H, W)
  int label = -1;                  // categorical
  std::vector<double> trajectory;  // regression, T x 2 row-major (valence, arousal)
  std::uint64_t seed = 0;
  int pattern = -1;                // base template id
  std::vector<std::size_t> burst_frames;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<SequenceSample> samples;

  std::vector<std::size_t> class_counts() const;
  // FNV-1a over labels, trajectories and feature bytes.
  std::uint64_t content_hash() const;
};

// Class id per index: largest-remainder counts, then a seeded shuffle.
std::vector<int> label_schedule(const DatasetSpec& spec);
std::vector<std::size_t> class_counts_for(const DatasetSpec& spec);

// Sample `index` in isolation; categorical tasks need its scheduled label.
SequenceSample generate_sample(const DatasetSpec& spec, std::size_t index, int label);

// Bitwise identical for every worker count.
Dataset generate(const DatasetSpec& spec, std::size_t threads = 1);

// Noise-free class template, (C0, T, H, W); exposed for tests.
Tensor64 class_base(const DatasetSpec& spec, int label);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

template <typename T>
struct Batch {
  Tensor<T> clips;  // (B, C0, T, H, W)
  Targets<T> targets;
};

template <typename T>
Batch<T> make_batch(const Dataset& d, std::span<const std::size_t> indices);

}  // namespace lsef
