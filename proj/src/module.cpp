#include "lsef/module.hpp"

#include <cmath>

#include "lsef/random.hpp"

namespace lsef {

template <typename T>
Tensor<T> uniform_fan_in(Shape shape, std::size_t fan_in, std::uint64_t seed,
                         const std::string& name) {
  Rng rng(mix_seed(seed, name));
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return parameter(Tensor<T>::from(std::move(shape), std::move(v)));
}

template <typename T>
Tensor<T> identity_depthwise(std::size_t channels, std::size_t kt, std::size_t kh, std::size_t kw) {
  auto t = Tensor<T>::zeros({channels, 1, kt, kh, kw});
  auto d = t.mutable_data();
  const std::size_t vol = kt * kh * kw;
  const std::size_t center = ((kt / 2) * kh + kh / 2) * kw + kw / 2;
  for (std::size_t c = 0; c < channels; ++c) d[c * vol + center] = T(1);
  return parameter(std::move(t));
}

template Tensor<float> uniform_fan_in(Shape, std::size_t, std::uint64_t, const std::string&);
template Tensor<double> uniform_fan_in(Shape, std::size_t, std::uint64_t, const std::string&);
template Tensor<float> identity_depthwise(std::size_t, std::size_t, std::size_t, std::size_t);
template Tensor<double> identity_depthwise(std::size_t, std::size_t, std::size_t, std::size_t);

}  // namespace lsef
