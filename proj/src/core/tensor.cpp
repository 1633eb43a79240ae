// SPDX-License-Identifier: Apache-2.0
#include "mssf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "mssf/autograd.hpp"

namespace mssf {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<TensorImpl<T>>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<TensorImpl<T>>()) {
  if (values.size() != shape_numel(shape))
    throw DimensionError("tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                         shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <typename T>
TensorImpl<T>& Tensor<T>::impl() const {
  if (!impl_) throw UsageError("tensor: use of an undefined tensor");
  return *impl_;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank())
    throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape()));
  return impl().shape[axis];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw DimensionError("tensor: item() on shape " + shape_str(shape()));
  return impl().data[0];
}

template <typename T>
T Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const auto& s = shape();
  if (s.size() != 4) throw DimensionError("tensor: at() needs rank 4, got " + shape_str(s));
  return impl().data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!is_leaf()) throw UsageError("tensor: requires_grad can only be set on leaves");
  impl().requires_grad = on;
  return *this;
}

template <typename T>
void Tensor<T>::zero_grad() {
  auto& im = impl();
  im.grad.assign(im.data.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  auto out = std::make_shared<TensorImpl<T>>();
  out->shape = impl().shape;
  out->data = impl().data;
  return from_impl(std::move(out));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return detach();
}

template <typename T>
Tensor<T> Tensor<T>::from_impl(std::shared_ptr<TensorImpl<T>> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1)
    throw UsageError("backward: loss must be a scalar, got shape " + shape_str(shape()));
  if (!requires_grad())
    throw UsageError("backward: tensor is detached from any recorded computation");
  Tape<T>::record(*this).backward();
}

template class Tensor<float>;
template class Tensor<double>;

// --- Tape ------------------------------------------------------------------

template <typename T>
Tape<T> Tape<T>::record(const Tensor<T>& root) {
  Tape tape;
  std::unordered_set<const TensorImpl<T>*> seen;
  // Iterative post-order DFS so deep graphs do not exhaust the stack.
  std::vector<std::pair<std::shared_ptr<TensorImpl<T>>, std::size_t>> stack;
  stack.emplace_back(root.impl_ptr(), 0);
  seen.insert(root.impl_ptr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& fn = node->grad_fn;
    if (fn && next < fn->inputs.size()) {
      auto child = fn->inputs[next++];
      if (child && child->requires_grad && seen.insert(child.get()).second)
        stack.emplace_back(std::move(child), 0);
      continue;
    }
    tape.nodes_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

template <typename T>
void Tape<T>::backward(bool release) {
  if (nodes_.empty()) return;
  auto& root = *nodes_.back();
  if (root.data.size() != 1) throw UsageError("backward: root of the tape is not a scalar");
  root.grad_buffer()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& node = **it;
    if (!node.grad_fn) continue;
    node.grad_fn->backward(node.grad_buffer());
    if (release) {
      node.grad_fn.reset();
      // Interior gradients are not observable once history is gone.
      node.grad.clear();
      node.grad.shrink_to_fit();
    }
  }
}

template <typename T>
void Tape<T>::clear() {
  for (auto& node : nodes_) node->grad_fn.reset();
  nodes_.clear();
}

template class Tape<float>;
template class Tape<double>;

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& x, const char* op) {
  auto d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw NumericError(std::string(op) + ": non-finite value at flat index " + std::to_string(i) +
                         " of output " + shape_str(x.shape()));
    }
  }
}

template void check_finite(const Tensor<float>&, const char*);
template void check_finite(const Tensor<double>&, const char*);

}  // namespace detail
}  // namespace mssf
