#include <algorithm>
#include <cmath>

#include "lsef/ops.hpp"
#include "ops_detail.hpp"

namespace lsef {

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require(logits.rank() == 2, ErrorKind::dimension,
          "cross_entropy: logits must be (B,K), got " + to_string(logits.shape()));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  require(labels.size() == batch, ErrorKind::dimension, "cross_entropy: label count mismatch");
  for (int l : labels)
    require(l >= 0 && static_cast<std::size_t>(l) < classes, ErrorKind::data,
            "cross_entropy: label " + std::to_string(l) + " outside 0.." +
                std::to_string(classes - 1));
  const auto z = logits.data();
  std::vector<T> probs(z.size());
  T total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = z.data() + b * classes;
    const T mx = *std::max_element(row, row + classes);
    T s = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = std::exp(row[c] - mx);
      s += probs[b * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] /= s;
    total += (mx + std::log(s)) - row[labels[b]];
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return make_op_result<T>("cross_entropy", {}, {total / static_cast<T>(batch)}, {logits},
                           [probs = std::move(probs), lab = std::move(lab), batch,
                            classes](detail::BackwardArgs<T>& args) {
                             T* gz = args.grad_in[0];
                             if (!gz) return;
                             const T g = args.grad_out[0] / static_cast<T>(batch);
                             for (std::size_t b = 0; b < batch; ++b)
                               for (std::size_t c = 0; c < classes; ++c) {
                                 const T onehot = static_cast<int>(c) == lab[b] ? T(1) : T(0);
                                 gz[b * classes + c] += g * (probs[b * classes + c] - onehot);
                               }
                           });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(), ErrorKind::dimension,
          "mse: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  return mean(square(sub(pred, target)));
}

#define LSEF_INSTANTIATE(T)                                                 \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>); \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
