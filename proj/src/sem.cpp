#include "lsef/sem.hpp"

#include <algorithm>
#include <cmath>

#include "lsef/error.hpp"
#include "lsef/ops.hpp"

namespace lsef {

std::vector<double> gaussian_taps(std::size_t k) {
  require(k >= 1 && k % 2 == 1, ErrorKind::configuration,
          "Gaussian window must be odd, got " + std::to_string(k));
  const double sigma = static_cast<double>(k) / 3.0;
  const double c = static_cast<double>(k / 2);
  std::vector<double> taps(k);
  double total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = static_cast<double>(i) - c;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

template <typename T>
Tensor<T> gaussian_kernel3d(std::size_t channels, std::size_t k) {
  const auto taps = gaussian_taps(k);
  const std::size_t vol = k * k * k;
  std::vector<double> one(vol);
  double total = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t c = 0; c < k; ++c) {
        one[(a * k + b) * k + c] = taps[a] * taps[b] * taps[c];
        total += one[(a * k + b) * k + c];
      }
  std::vector<T> data(channels * vol);
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t i = 0; i < vol; ++i) data[ch * vol + i] = static_cast<T>(one[i] / total);
  return Tensor<T>::from({channels, 1, k, k, k}, std::move(data));
}

template <typename T>
Tensor<T> gaussian_lowpass(const Tensor<T>& x, std::size_t k) {
  require(x.rank() == 5, ErrorKind::dimension,
          "gaussian_lowpass expects (B,C,T,H,W), got " + to_string(x.shape()));
  const std::size_t channels = x.dim(1);
  return conv3d(x, gaussian_kernel3d<T>(channels, k), {channels, {1, 1, 1}, Padding::reflect});
}

template <typename T>
Decomposition<T> decompose(const Tensor<T>& x, std::size_t k) {
  auto low = gaussian_lowpass(x, k);
  auto high = sub(x, low);
  return {std::move(low), std::move(high)};
}

template <typename T>
SemState<T> SemState<T>::init(std::size_t channels, std::uint64_t seed, const SemConfig& cfg) {
  require(channels > 0, ErrorKind::configuration, "SEM needs at least one channel");
  gaussian_taps(cfg.kernel_size);  // validates the window
  const std::size_t hidden = std::max<std::size_t>(1, channels / std::max<std::size_t>(1, cfg.reduction));
  SemState s;
  s.channels = channels;
  s.kernel_size = cfg.kernel_size;
  s.sigma = static_cast<double>(cfg.kernel_size) / 3.0;
  s.init_seed = seed;
  s.ca_reduce = uniform_fan_in<T>({channels, hidden}, channels, seed, "sem.ca_reduce");
  s.ca_expand = uniform_fan_in<T>({hidden, channels}, hidden, seed, "sem.ca_expand");
  s.energy_kernel = identity_depthwise<T>(channels, 3, 3, 3);
  s.lambda_raw = parameter(Tensor<T>::zeros({1}));
  return s;
}

template <typename T>
ParameterList<T> SemState<T>::parameters(const std::string& prefix) const {
  return {{prefix + "ca_reduce", ca_reduce},
          {prefix + "ca_expand", ca_expand},
          {prefix + "energy_kernel", energy_kernel},
          {prefix + "lambda_raw", lambda_raw}};
}

template <typename T>
T SemState<T>::lambda() const {
  const T r = lambda_raw.item();
  return r >= 0 ? T(1) / (T(1) + std::exp(-r)) : std::exp(r) / (T(1) + std::exp(r));
}

namespace {

template <typename T>
void check_channels(const Tensor<T>& x, const SemState<T>& s) {
  require(x.rank() == 5, ErrorKind::dimension, "SEM expects (B,C,T,H,W), got " + to_string(x.shape()));
  require(x.dim(1) == s.channels, ErrorKind::dimension,
          "SEM state has " + std::to_string(s.channels) + " channels, input " + to_string(x.shape()));
}

}  // namespace

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& x, const SemState<T>& state) {
  check_channels(x, state);
  const std::size_t b = x.dim(0), c = x.dim(1);
  auto pooled = reshape(global_avg_pool(x), {b, c});
  auto hidden = relu(matmul(pooled, state.ca_reduce));
  auto logits = matmul(hidden, state.ca_expand);
  return reshape(logits, {b, c, 1, 1, 1});
}

template <typename T>
Tensor<T> refine_high(const Tensor<T>& x_high, const SemState<T>& state) {
  check_channels(x_high, state);
  auto gate = sigmoid(channel_attention(x_high, state));
  auto energy = conv3d(x_high, state.energy_kernel, {state.channels, {1, 1, 1}, Padding::zeros});
  return mul(energy, gate);
}

template <typename T>
Tensor<T> sem_forward(const Tensor<T>& x, const SemState<T>& state) {
  check_channels(x, state);
  auto parts = decompose(x, state.kernel_size);
  auto refined = refine_high(parts.high, state);
  auto lambda = reshape(sigmoid(state.lambda_raw), {1, 1, 1, 1, 1});
  auto keep = add_scalar(neg(lambda), T(1));
  return add(mul(parts.low, lambda), mul(refined, keep));
}

#define LSEF_INSTANTIATE(T)                                                   \
  template struct SemState<T>;                                                \
  template Tensor<T> gaussian_kernel3d<T>(std::size_t, std::size_t);          \
  template Tensor<T> gaussian_lowpass(const Tensor<T>&, std::size_t);         \
  template Decomposition<T> decompose(const Tensor<T>&, std::size_t);         \
  template Tensor<T> channel_attention(const Tensor<T>&, const SemState<T>&); \
  template Tensor<T> refine_high(const Tensor<T>&, const SemState<T>&);       \
  template Tensor<T> sem_forward(const Tensor<T>&, const SemState<T>&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
