#include "lsef/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "lsef/error.hpp"

namespace lsef {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension:
      return "dimension error";
    case ErrorKind::configuration:
      return "configuration error";
    case ErrorKind::numerical:
      return "numerical error";
    case ErrorKind::usage:
      return "usage error";
    case ErrorKind::data:
      return "data error";
    case ErrorKind::io:
      return "I/O error";
    case ErrorKind::resource:
      return "resource error";
    case ErrorKind::optimizer:
      return "optimizer error";
    case ErrorKind::verification:
      return "verification failure";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

struct FaultState {
  std::string op;
  double factor = 1.0;
};

FaultState& fault_state() {
  static FaultState s;
  return s;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace fault {
void inject_backward(std::string op, double factor) {
  fault_state().op = std::move(op);
  fault_state().factor = factor;
}
void clear() { fault_state() = {}; }
bool active() { return !fault_state().op.empty(); }
}  // namespace fault

template <typename T>
detail::TensorImpl<T>& Tensor<T>::impl() const {
  require(impl_ != nullptr, ErrorKind::usage, "use of an undefined tensor");
  return *impl_;
}

template <typename T>
Tensor<T> Tensor<T>::wrap(std::shared_ptr<detail::TensorImpl<T>> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  for (auto d : shape)
    require(d > 0, ErrorKind::dimension, "tensor extents must be positive, got " + to_string(shape));
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->data.assign(lsef::numel(shape), value);
  impl->shape = std::move(shape);
  return wrap(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values) {
  for (auto d : shape)
    require(d > 0, ErrorKind::dimension, "tensor extents must be positive, got " + to_string(shape));
  require(lsef::numel(shape) == values.size(), ErrorKind::dimension,
          "shape " + to_string(shape) + " does not match " + std::to_string(values.size()) +
              " values");
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return wrap(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return from({}, {value});
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  require(axis < rank(), ErrorKind::dimension,
          "axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
  return impl().shape[axis];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  require(is_leaf(), ErrorKind::usage, "only leaf tensors may be modified in place");
  return impl().data;
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, ErrorKind::usage, "item() on a tensor of shape " + to_string(shape()));
  return impl().data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  require(is_leaf(), ErrorKind::usage, "requires_grad can only be set on leaves");
  impl().requires_grad = on;
  return *this;
}

template <typename T>
void Tensor<T>::zero_grad() {
  impl().grad.clear();
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(impl().data.begin(), impl().data.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), impl().data);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor c = detach();
  c.impl_->requires_grad = impl().requires_grad && is_leaf();
  return c;
}

template <typename T>
template <typename U>
Tensor<U> Tensor<T>::cast() const {
  std::vector<U> out(impl().data.begin(), impl().data.end());
  return Tensor<U>::from(shape(), std::move(out));
}

template <typename T>
void Tensor<T>::backward() const {
  require(numel() == 1, ErrorKind::usage,
          "backward() needs a scalar loss, got shape " + to_string(shape()));
  require(requires_grad(), ErrorKind::usage, "backward() on a tensor with no recorded tape");
  const T one = 1;
  Tape<T>::record(*this).backward(std::span<const T>(&one, 1));
}

template <typename T>
Tensor<T> make_op_result(std::string_view op, Shape shape, std::vector<T> data,
                         const std::vector<Tensor<T>>& inputs, detail::BackwardFn<T> backward) {
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (grad_enabled()) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.requires_grad(); });
    if (any) {
      auto node = std::make_shared<detail::Node<T>>();
      node->op = op;
      node->inputs.reserve(inputs.size());
      for (const auto& in : inputs) node->inputs.push_back(in.impl_ptr());
      node->backward = std::move(backward);
      impl->grad_fn = std::move(node);
      impl->requires_grad = true;
    }
  }
  return Tensor<T>::wrap(std::move(impl));
}

template <typename T>
Tape<T> Tape<T>::record(const Tensor<T>& root) {
  Tape tape;
  using Impl = detail::TensorImpl<T>;
  std::unordered_map<const Impl*, std::size_t> index;
  // Iterative post-order DFS; only tensors that need gradients are kept.
  struct Frame {
    std::shared_ptr<Impl> t;
    std::size_t next_input = 0;
  };
  std::vector<Frame> stack;
  std::unordered_map<const Impl*, bool> visiting;
  stack.push_back({root.impl_ptr()});
  visiting[root.impl_ptr().get()] = true;
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& node = f.t->grad_fn;
    if (node && f.next_input < node->inputs.size()) {
      auto child = node->inputs[f.next_input++];
      if (!child->requires_grad || visiting.count(child.get())) continue;
      visiting[child.get()] = true;
      stack.push_back({std::move(child)});
      continue;
    }
    Entry e;
    e.tensor = f.t;
    if (node) {
      e.op = node->op;
      for (const auto& in : node->inputs) {
        auto it = index.find(in.get());
        if (it != index.end()) e.parents.push_back(it->second);
      }
    }
    index[f.t.get()] = tape.entries_.size();
    tape.entries_.push_back(std::move(e));
    stack.pop_back();
  }
  return tape;
}

template <typename T>
std::size_t Tape<T>::backward(std::span<const T> seed) const {
  using Impl = detail::TensorImpl<T>;
  if (entries_.empty()) return 0;
  std::unordered_map<const Impl*, std::size_t> index;
  for (std::size_t i = 0; i < entries_.size(); ++i) index[entries_[i].tensor.get()] = i;

  std::vector<std::vector<T>> grads(entries_.size());
  grads.back().assign(seed.begin(), seed.end());
  const FaultState fs = fault_state();
  std::size_t executed = 0;

  for (std::size_t i = entries_.size(); i-- > 0;) {
    const Entry& e = entries_[i];
    Impl& t = *e.tensor;
    if (grads[i].empty()) continue;
    if (!t.grad_fn) {
      if (t.grad.empty()) t.grad.assign(t.data.size(), T(0));
      for (std::size_t j = 0; j < t.data.size(); ++j) t.grad[j] += grads[i][j];
      grads[i] = {};
      continue;
    }
    const auto& node = *t.grad_fn;
    if (!fs.op.empty() && fs.op == node.op)
      for (auto& g : grads[i]) g = static_cast<T>(g * fs.factor);
    detail::BackwardArgs<T> args{t, grads[i], node.inputs, {}};
    args.grad_in.resize(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto& in = node.inputs[k];
      if (!in->requires_grad) continue;
      auto& buf = grads[index.at(in.get())];
      if (buf.empty()) buf.assign(in->data.size(), T(0));
      args.grad_in[k] = buf.data();
    }
    node.backward(args);
    ++executed;
    grads[i] = {};
  }
  return executed;
}

template <typename T>
void check_finite(const Tensor<T>& t, std::string_view context) {
  if (!t.all_finite())
    fail(ErrorKind::numerical, "non-finite values in " + std::string(context));
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template Tensor<double> Tensor<float>::cast<double>() const;
template Tensor<float> Tensor<double>::cast<float>() const;
template Tensor<float> Tensor<float>::cast<float>() const;
template Tensor<double> Tensor<double>::cast<double>() const;
template Tensor<float> make_op_result(std::string_view, Shape, std::vector<float>,
                                      const std::vector<Tensor<float>>&, detail::BackwardFn<float>);
template Tensor<double> make_op_result(std::string_view, Shape, std::vector<double>,
                                       const std::vector<Tensor<double>>&,
                                       detail::BackwardFn<double>);
template void check_finite(const Tensor<float>&, std::string_view);
template void check_finite(const Tensor<double>&, std::string_view);

}  // namespace lsef
