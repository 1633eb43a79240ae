// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mssf/tensor.hpp"

namespace mssf {

/// The recorded computation behind a scalar, in topological order (every
/// node appears after all of its inputs). Built on demand from the root's
/// history; backward walks it in reverse.
template <typename T>
class Tape {
 public:
  static Tape record(const Tensor<T>& root);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<TensorImpl<T>>>& nodes() const { return nodes_; }

  /// Seeds d(root)/d(root) = 1 and propagates to every leaf that requires a
  /// gradient. Gradients accumulate into existing leaf grad slots.
  /// When `release` is set, each node's history is dropped as soon as it has
  /// been processed, freeing intermediates.
  void backward(bool release = true);

  /// Drops the history of every recorded node.
  void clear();

 private:
  std::vector<std::shared_ptr<TensorImpl<T>>> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

namespace detail {

/// True when an op on these inputs should be recorded.
template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (!grad_enabled()) return false;
  for (const auto* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

/// Attaches a backward rule to `out`. Inputs that do not require a gradient
/// are still listed so the topological sort sees them, but rules must skip
/// them (check `wants_grad`).
template <typename T, typename Fn>
void record(Tensor<T>& out, const char* name, std::vector<const Tensor<T>*> inputs, Fn&& fn) {
  auto node = std::make_shared<GradFn<T>>();
  node->name = name;
  for (const auto* t : inputs) node->inputs.push_back(t->impl_ptr());
  node->backward = std::forward<Fn>(fn);
  auto& impl = *out.impl_ptr();
  impl.requires_grad = true;
  impl.grad_fn = std::move(node);
}

template <typename T>
bool wants_grad(const std::shared_ptr<TensorImpl<T>>& impl) {
  return impl && impl->requires_grad;
}

/// Throws NumericError naming `op` if `x` holds a NaN or Inf.
template <typename T>
void check_finite(const Tensor<T>& x, const char* op);

}  // namespace detail
}  // namespace mssf
