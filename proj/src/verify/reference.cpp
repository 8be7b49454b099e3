#include "lsef/verify/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lsef/gradcheck.hpp"
#include "lsef/ops.hpp"

namespace lsef::reference {

namespace {

Tensor64 copy_leaf(const Tensor64& t, bool trainable) {
  auto c = Tensor64::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
  if (trainable) c.set_requires_grad(true);
  return c;
}

}  // namespace

TwoLayerNet TwoLayerNet::make(std::uint64_t seed, std::size_t in, std::size_t hidden, std::size_t out,
                              std::size_t batch) {
  TwoLayerNet n;
  n.w1 = copy_leaf(random_tensor({hidden, in}, seed, "w1"), true);
  n.b1 = copy_leaf(random_tensor({hidden}, seed, "b1"), true);
  n.w2 = copy_leaf(random_tensor({out, hidden}, seed, "w2"), true);
  n.b2 = copy_leaf(random_tensor({out}, seed, "b2"), true);
  n.x = random_tensor({batch, in}, seed, "x");
  n.y = random_tensor({batch, out}, seed, "y");
  return n;
}

TwoLayerNet TwoLayerNet::clone() const {
  TwoLayerNet n;
  n.w1 = copy_leaf(w1, true);
  n.b1 = copy_leaf(b1, true);
  n.w2 = copy_leaf(w2, true);
  n.b2 = copy_leaf(b2, true);
  n.x = copy_leaf(x, false);
  n.y = copy_leaf(y, false);
  return n;
}

ParameterList<double> TwoLayerNet::parameters() const {
  return {{"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}};
}

Tensor64 TwoLayerNet::loss() const { return mse(linear(relu(linear(x, w1, b1)), w2, b2), y); }

void sam_step(const ParameterList<double>& params, const LossFn<double>& loss, double rho, double lr) {
  auto gradients = [&] {
    for (auto p : params) p.tensor.zero_grad();
    loss().backward();
    std::vector<std::vector<double>> g;
    for (const auto& p : params) {
      if (p.tensor.has_grad())
        g.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
      else
        g.emplace_back(p.tensor.numel(), 0.0);
    }
    return g;
  };
  const auto g1 = gradients();
  std::vector<std::vector<double>> origin;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = NamedTensor<double>(params[i]).tensor.mutable_data();
    origin.emplace_back(w.begin(), w.end());
    double norm = 0;
    for (double v : g1[i]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0) continue;
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += rho * g1[i][j] / norm;
  }
  const auto g2 = gradients();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = NamedTensor<double>(params[i]).tensor.mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = origin[i][j] - lr * g2[i][j];
  }
}

double max_param_diff(const ParameterList<double>& a, const ParameterList<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    for (std::size_t j = 0; j < a[i].tensor.numel(); ++j)
      m = std::max(m, std::abs(a[i].tensor[j] - b[i].tensor[j]));
  return a.size() == b.size() ? m : INFINITY;
}

bool bitwise_equal(const ParameterList<double>& a, const ParameterList<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a[i].tensor.data(), y = b[i].tensor.data();
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace lsef::reference
