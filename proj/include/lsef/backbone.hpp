#pragma once

// Three-stage depthwise-separable spatiotemporal stem with optional SEM,
// DDM and CIM blocks at the stage boundaries, followed by a categorical or
// per-frame valence/arousal head.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsef/cim.hpp"
#include "lsef/config.hpp"
#include "lsef/ddm.hpp"
#include "lsef/module.hpp"
#include "lsef/sem.hpp"
#include "lsef/serialize.hpp"

namespace lsef {

enum class Head { categorical, regression };

const char* to_string(Head h);
Head parse_head(const std::string& text);

struct BackboneConfig {
  std::size_t in_channels = 3;
  std::array<std::size_t, 3> widths{8, 16, 32};
  std::size_t frames = 8;
  std::size_t height = 16;
  std::size_t width = 16;
  bool use_sem = false;
  bool use_ddm = false;
  bool use_cim = false;
  Head head = Head::categorical;
  std::size_t classes = 7;
  SemConfig sem;
  std::size_t cim_max_nodes = 4096;

  void validate() const;
  // Flat "model.*" keys; round-trips through from_config.
  ConfigMap to_config() const;
  static BackboneConfig from_config(const ConfigMap& cfg);
  // "none" or a comma list drawn from sem, ddm, cim.
  void set_modules(const std::string& list);
  std::string modules() const;
  std::uint64_t fingerprint() const { return config_fingerprint(to_config()); }
};

template <typename T>
struct BackboneState {
  Tensor<T> dw1, pw1;  // stage 1: depthwise 3^3 on C0, pointwise C0 -> w0
  Tensor<T> dw2, pw2;  // stage 2: spatial stride 2, w0 -> w1
  Tensor<T> dw3, pw3;  // stage 3: w1 -> w2
  std::optional<SemState<T>> sem;
  std::optional<DdmState<T>> ddm;
  std::optional<CimState<T>> cim;
  Tensor<T> head_w, head_b;
  std::uint64_t seed = 0;

  static BackboneState init(const BackboneConfig& cfg, std::uint64_t seed);
  // Stem, enabled blocks in pipeline order, then the head.
  ParameterList<T> parameters() const;
};

// Errors when an enabled block has no state; returns one warning per
// state present for a disabled block (that state is ignored).
template <typename T>
std::vector<std::string> check_states(const BackboneConfig& cfg, const BackboneState<T>& state);

// clip: (B, C0, T, H, W) -> logits (B, K) or trajectory (B, T, 2) in [-1, 1].
template <typename T>
Tensor<T> backbone_forward(const Tensor<T>& clip, const BackboneConfig& cfg, const BackboneState<T>& state);

// Feature map after stage 3 and its block, before the head.
template <typename T>
Tensor<T> backbone_features(const Tensor<T>& clip, const BackboneConfig& cfg, const BackboneState<T>& state);

template <typename T>
struct Targets {
  std::vector<int> labels;  // categorical
  Tensor<T> trajectory;     // regression, (B, T, 2)
};

template <typename T>
Tensor<T> head_loss(const Tensor<T>& outputs, const Targets<T>& targets, Head head);

// Checkpoint: every parameter under its name, plus "config.*" metadata,
// the fingerprint and the init seed. Restored bit-exactly.
template <typename T>
io::Archive make_checkpoint(const BackboneConfig& cfg, const BackboneState<T>& state);

template <typename T>
struct Restored {
  BackboneConfig config;
  BackboneState<T> state;
};

template <typename T>
Restored<T> restore_checkpoint(const io::Archive& archive);

}  // namespace lsef
