#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsef {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until the first accumulation
  std::shared_ptr<Node<T>> grad_fn;
};

// What a backward rule sees: the forward output, its incoming gradient,
// the op inputs and one accumulation buffer per input (nullptr when that
// input does not need a gradient).
template <typename T>
struct BackwardArgs {
  const TensorImpl<T>& out;
  std::span<const T> grad_out;
  const std::vector<std::shared_ptr<TensorImpl<T>>>& inputs;
  std::vector<T*> grad_in;

  const TensorImpl<T>& in(std::size_t i) const { return *inputs[i]; }
};

template <typename T>
using BackwardFn = std::function<void(BackwardArgs<T>&)>;

template <typename T>
struct Node {
  std::string_view op;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  BackwardFn<T> backward;
};

}  // namespace detail

// Dense row-major tensor with an optional reverse-mode gradient record.
// Values recorded on the gradient graph are immutable; only leaves (built
// from data, or produced while no gradient is tracked) expose mutable
// storage, which is how optimizers update parameters.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from(Shape shape, std::vector<T> values);
  static Tensor scalar(T value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl().data.size(); }

  std::span<const T> data() const { return impl().data; }
  std::span<T> mutable_data();
  T item() const;
  T operator[](std::size_t flat) const { return impl().data[flat]; }

  bool requires_grad() const { return impl().requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  bool is_leaf() const { return impl().grad_fn == nullptr; }
  bool has_grad() const { return !impl().grad.empty(); }
  std::span<const T> grad() const { return impl().grad; }
  void zero_grad();

  // Populates .grad() on every requires_grad leaf reachable from this
  // scalar. Gradients accumulate across calls until zero_grad().
  void backward() const;

  bool all_finite() const;
  Tensor detach() const;
  Tensor clone() const;

  template <typename U>
  Tensor<U> cast() const;

  // Identity of the underlying storage (two handles may share it).
  const void* id() const { return impl_.get(); }

  const std::shared_ptr<detail::TensorImpl<T>>& impl_ptr() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl<T>> impl);

 private:
  detail::TensorImpl<T>& impl() const;
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Builds the op output and, when grad mode is on and any input needs a
// gradient, records the node.
template <typename T>
Tensor<T> make_op_result(std::string_view op, Shape shape, std::vector<T> data,
                         const std::vector<Tensor<T>>& inputs, detail::BackwardFn<T> backward);

// Reachable computation in topological order (parents first). Built on
// demand by backward(); exposed so the ordering can be inspected.
template <typename T>
class Tape {
 public:
  struct Entry {
    std::shared_ptr<detail::TensorImpl<T>> tensor;
    std::string_view op;  // empty for leaves
    std::vector<std::size_t> parents;
  };

  static Tape record(const Tensor<T>& root);

  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Runs the backward rules once each, last entry seeded with `seed`.
  // Returns the number of backward rules executed.
  std::size_t backward(std::span<const T> seed) const;

 private:
  std::vector<Entry> entries_;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Scales the incoming gradient of every node with the given op name during
// backward. Harness self-test only: proves a broken rule is caught.
namespace fault {
void inject_backward(std::string op, double factor);
void clear();
bool active();
}  // namespace fault

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

// Throws a numerical error naming `context` if any value is NaN or Inf.
template <typename T>
void check_finite(const Tensor<T>& t, std::string_view context);

}  // namespace lsef
