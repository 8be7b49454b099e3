#include "lsef/ddm.hpp"

#include <algorithm>
#include <cmath>

#include "lsef/error.hpp"
#include "lsef/ops.hpp"

namespace lsef {

template <typename T>
DdmState<T> DdmState<T>::init(std::size_t channels, std::size_t frames, std::uint64_t seed) {
  require(channels > 0 && frames > 0, ErrorKind::configuration, "DDM needs channels and frames");
  DdmState s;
  s.channels = channels;
  s.frames = frames;
  s.graph_channels = std::max<std::size_t>(1, channels / 2);
  s.init_seed = seed;
  const std::size_t cg = s.graph_channels;
  // w2 = 0 keeps the gate at exactly 0.5; w1 must not also be zero or
  // neither matrix ever receives a gradient.
  s.w1 = uniform_fan_in<T>({frames, frames}, frames, seed, "ddm.w1");
  s.w2 = parameter(Tensor<T>::zeros({frames, frames}));
  s.phi_g = uniform_fan_in<T>({cg, channels, 1, 1, 1}, channels, seed, "ddm.phi_g");
  s.phi_o = uniform_fan_in<T>({cg, channels, 1, 1, 1}, channels, seed, "ddm.phi_o");
  s.theta_local = uniform_fan_in<T>({channels, 1, 3, 3, 3}, 27, seed, "ddm.theta_local");
  s.theta_global = uniform_fan_in<T>({channels, channels, 1, 1, 1}, channels, seed, "ddm.theta_global");
  s.psi_fuse = uniform_fan_in<T>({channels, 2 * channels + cg, 1, 1, 1}, 2 * channels + cg, seed,
                                 "ddm.psi_fuse");
  return s;
}

template <typename T>
ParameterList<T> DdmState<T>::parameters(const std::string& prefix) const {
  return {{prefix + "w1", w1},
          {prefix + "w2", w2},
          {prefix + "phi_g", phi_g},
          {prefix + "phi_o", phi_o},
          {prefix + "theta_local", theta_local},
          {prefix + "theta_global", theta_global},
          {prefix + "psi_fuse", psi_fuse}};
}

namespace {

template <typename T>
void check_input(const Tensor<T>& x, const DdmState<T>& s) {
  require(x.rank() == 5, ErrorKind::dimension, "DDM expects (B,C,T,H,W), got " + to_string(x.shape()));
  require(x.dim(1) == s.channels, ErrorKind::dimension,
          "DDM state has " + std::to_string(s.channels) + " channels, input " + to_string(x.shape()));
  require(x.dim(2) == s.frames, ErrorKind::dimension,
          "DDM state has T=" + std::to_string(s.frames) + ", input " + to_string(x.shape()));
}

// (B, C', T, H, W) -> (B*T, C', H*W)
template <typename T>
Tensor<T> frames_as_graphs(const Tensor<T>& x) {
  const auto& s = x.shape();
  return reshape(permute(x, {0, 2, 1, 3, 4}), {s[0] * s[2], s[1], s[3] * s[4]});
}

}  // namespace

template <typename T>
TemporalGate<T> temporal_gate(const Tensor<T>& x, const DdmState<T>& state) {
  check_input(x, state);
  const std::size_t b = x.dim(0), t = x.dim(2);
  auto pooled = reshape(mean(x, {1, 3, 4}, false), {b, t});
  auto hidden = relu(matmul(pooled, state.w1, false, true));
  auto gate = sigmoid(matmul(hidden, state.w2, false, true));
  auto routed = mul(x, reshape(gate, {b, 1, t, 1, 1}));
  return {std::move(routed), std::move(gate)};
}

template <typename T>
GraphInteraction<T> graph_interact_detailed(const Tensor<T>& x_routed, const DdmState<T>& state) {
  check_input(x_routed, state);
  const auto& s = x_routed.shape();
  auto g_hat = l2_normalize(frames_as_graphs(conv3d(x_routed, state.phi_g)), 1);
  auto o_hat = l2_normalize(frames_as_graphs(conv3d(x_routed, state.phi_o)), 1);
  auto affinity = softmax(matmul(g_hat, o_hat, true, false), 2);
  // node j gathers sum_i o_hat[:, i] * affinity[j, i]
  auto nodes = matmul(o_hat, affinity, false, true);
  auto out = permute(reshape(nodes, {s[0], s[2], state.graph_channels, s[3], s[4]}), {0, 2, 1, 3, 4});
  return {std::move(out), std::move(g_hat), std::move(o_hat), std::move(affinity)};
}

template <typename T>
Tensor<T> ddm_forward(const Tensor<T>& x, const DdmState<T>& state) {
  auto routed = temporal_gate(x, state).routed;
  auto local = conv3d(routed, state.theta_local, {state.channels, {1, 1, 1}, Padding::zeros});
  auto graph = graph_interact(routed, state);
  auto context = mean(routed, {2}, true);
  auto global = broadcast_to(conv3d(context, state.theta_global), routed.shape());
  return conv3d(concat<T>({local, graph, global}, 1), state.psi_fuse);
}

template <typename T>
double projection_overlap(const GraphInteraction<T>& g) {
  const auto& s = g.g_hat.shape();
  const auto gv = g.g_hat.data();
  const auto ov = g.o_hat.data();
  double total = 0;
  for (std::size_t b = 0; b < s[0]; ++b)
    for (std::size_t n = 0; n < s[2]; ++n) {
      double d = 0;
      for (std::size_t c = 0; c < s[1]; ++c) {
        const std::size_t i = (b * s[1] + c) * s[2] + n;
        d += static_cast<double>(gv[i]) * static_cast<double>(ov[i]);
      }
      total += std::abs(d);
    }
  return total / static_cast<double>(s[0] * s[2]);
}

#define LSEF_INSTANTIATE(T)                                                                     \
  template struct DdmState<T>;                                                                  \
  template TemporalGate<T> temporal_gate(const Tensor<T>&, const DdmState<T>&);                 \
  template GraphInteraction<T> graph_interact_detailed(const Tensor<T>&, const DdmState<T>&);   \
  template Tensor<T> ddm_forward(const Tensor<T>&, const DdmState<T>&);                         \
  template double projection_overlap(const GraphInteraction<T>&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
