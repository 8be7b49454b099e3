#include "lsef/cim.hpp"

#include <algorithm>
#include <cmath>

#include "lsef/error.hpp"
#include "lsef/ops.hpp"

namespace lsef {

template <typename T>
CimState<T> CimState<T>::init(std::size_t channels, std::uint64_t seed, const CimConfig& cfg) {
  require(channels > 0, ErrorKind::configuration, "CIM needs at least one channel");
  require(!cfg.scales.empty(), ErrorKind::configuration, "CIM needs at least one scale");
  for (const auto& s : cfg.scales)
    require(s[0] % 2 == 1 && s[1] % 2 == 1 && s[2] % 2 == 1, ErrorKind::configuration,
            "CIM scale extents must be odd");
  CimState st;
  st.channels = channels;
  st.attn_channels = std::max<std::size_t>(1, channels / 2);
  st.scales = cfg.scales;
  st.max_nodes = cfg.max_nodes;
  st.init_seed = seed;
  const std::size_t ca = st.attn_channels;
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    const auto& s = cfg.scales[i];
    st.scale_kernels.push_back(uniform_fan_in<T>({channels, 1, s[0], s[1], s[2]}, s[0] * s[1] * s[2],
                                                 seed, "cim.scale" + std::to_string(i)));
  }
  const std::size_t fused = cfg.scales.size() * channels;
  st.fuse_kernel = uniform_fan_in<T>({channels, fused, 1, 1, 1}, fused, seed, "cim.fuse");
  st.temp_weight = parameter(Tensor<T>::zeros({1, 1, 3, 1, 1}));
  st.temp_bias = parameter(Tensor<T>::zeros({1}));
  st.theta_proj = uniform_fan_in<T>({ca, channels, 1, 1, 1}, channels, seed, "cim.theta");
  st.phi_proj = uniform_fan_in<T>({ca, channels, 1, 1, 1}, channels, seed, "cim.phi");
  st.graph_out = uniform_fan_in<T>({channels, ca, 1, 1, 1}, ca, seed, "cim.graph_out");
  st.residual_scale = parameter(Tensor<T>::zeros({1}));
  return st;
}

template <typename T>
ParameterList<T> CimState<T>::parameters(const std::string& prefix) const {
  ParameterList<T> out;
  for (std::size_t i = 0; i < scale_kernels.size(); ++i)
    out.push_back({prefix + "scale" + std::to_string(i), scale_kernels[i]});
  out.push_back({prefix + "fuse", fuse_kernel});
  out.push_back({prefix + "temp_weight", temp_weight});
  out.push_back({prefix + "temp_bias", temp_bias});
  out.push_back({prefix + "theta", theta_proj});
  out.push_back({prefix + "phi", phi_proj});
  out.push_back({prefix + "graph_out", graph_out});
  out.push_back({prefix + "residual_scale", residual_scale});
  return out;
}

namespace {

template <typename T>
void check_input(const Tensor<T>& x, const CimState<T>& s) {
  require(x.rank() == 5, ErrorKind::dimension, "CIM expects (B,C,T,H,W), got " + to_string(x.shape()));
  require(x.dim(1) == s.channels, ErrorKind::dimension,
          "CIM state has " + std::to_string(s.channels) + " channels, input " + to_string(x.shape()));
}

}  // namespace

template <typename T>
Tensor<T> multiscale(const Tensor<T>& x, const CimState<T>& state) {
  check_input(x, state);
  std::vector<Tensor<T>> branches;
  branches.reserve(state.scale_kernels.size());
  // Reflect padding: a unit-sum branch maps a constant field to itself.
  for (const auto& k : state.scale_kernels)
    branches.push_back(conv3d(x, k, {state.channels, {1, 1, 1}, Padding::reflect}));
  auto cat = branches.size() == 1 ? branches.front() : concat(branches, 1);
  return conv3d(cat, state.fuse_kernel);
}

template <typename T>
Tensor<T> temporal_attention(const Tensor<T>& x_ms, const CimState<T>& state) {
  check_input(x_ms, state);
  const std::size_t b = x_ms.dim(0), t = x_ms.dim(2);
  auto context = mean(x_ms, {1, 3, 4}, true);  // (B, 1, T, 1, 1)
  auto mapped = conv3d(context, state.temp_weight, {1, {1, 1, 1}, Padding::reflect});
  auto logits = add(reshape(mapped, {b, t}), reshape(state.temp_bias, {1, 1}));
  return sigmoid(logits);
}

template <typename T>
Tensor<T> temporal_recalibrate(const Tensor<T>& x_ms, const CimState<T>& state) {
  auto attn = temporal_attention(x_ms, state);
  return mul(x_ms, reshape(attn, {x_ms.dim(0), 1, x_ms.dim(2), 1, 1}));
}

template <typename T>
NonlocalGraph<T> nonlocal_graph_detailed(const Tensor<T>& x_ta, const CimState<T>& state) {
  check_input(x_ta, state);
  const auto& s = x_ta.shape();
  const std::size_t b = s[0], m = s[2] * s[3] * s[4], ca = state.attn_channels;
  require(m <= state.max_nodes, ErrorKind::resource,
          "non-local graph over " + std::to_string(m) + " nodes exceeds the cap of " +
              std::to_string(state.max_nodes) + "; reduce T, H or W");
  auto th = reshape(conv3d(x_ta, state.theta_proj), {b, ca, m});
  auto ph = reshape(conv3d(x_ta, state.phi_proj), {b, ca, m});
  const T inv_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(ca)));
  auto affinity = softmax(scale(matmul(th, ph, true, false), inv_scale), 2);
  auto agg = reshape(matmul(ph, affinity, false, true), {b, ca, s[2], s[3], s[4]});
  auto update = mul(conv3d(agg, state.graph_out), reshape(state.residual_scale, {1, 1, 1, 1, 1}));
  return {add(x_ta, update), std::move(affinity), std::move(ph)};
}

template <typename T>
Tensor<T> cim_forward(const Tensor<T>& x, const CimState<T>& state) {
  return nonlocal_graph(temporal_recalibrate(multiscale(x, state), state), state);
}

#define LSEF_INSTANTIATE(T)                                                                 \
  template struct CimState<T>;                                                              \
  template Tensor<T> multiscale(const Tensor<T>&, const CimState<T>&);                      \
  template Tensor<T> temporal_attention(const Tensor<T>&, const CimState<T>&);              \
  template Tensor<T> temporal_recalibrate(const Tensor<T>&, const CimState<T>&);            \
  template NonlocalGraph<T> nonlocal_graph_detailed(const Tensor<T>&, const CimState<T>&);  \
  template Tensor<T> cim_forward(const Tensor<T>&, const CimState<T>&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
