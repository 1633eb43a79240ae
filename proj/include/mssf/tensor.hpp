// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mssf/error.hpp"

namespace mssf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() {
  return DType::f32;
}
template <>
constexpr DType dtype_of<double>() {
  return DType::f64;
}

template <typename T>
struct TensorImpl;

/// One recorded primitive application. `backward` receives the gradient of the
/// node's output and accumulates into the gradients of `inputs`.
template <typename T>
struct GradFn {
  const char* name = "";
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::function<void(std::span<const T> grad_out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<GradFn<T>> grad_fn;

  std::span<T> grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Graph recording is on by default; a NoGradGuard turns it off for the
/// current thread (inference, evaluation, finite differences).
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

/// Dense row-major tensor with an optional gradient slot. Copies share the
/// underlying storage; values are treated as immutable once an op has
/// produced them, with the exception of leaves (parameters) that optimizers
/// and initializers write through `mutable_data()`.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }
  static Tensor scalar(T value) { return Tensor(Shape{}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl().data.size(); }

  std::span<const T> data() const { return impl().data; }
  std::span<T> mutable_data() { return impl().data; }
  T item() const;
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const { return impl().requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl().grad_fn == nullptr; }

  /// Gradient accumulated by backward; zeros when nothing reached this tensor.
  std::span<const T> grad() const { return impl_->grad_buffer(); }
  std::span<T> mutable_grad() { return impl_->grad_buffer(); }
  void zero_grad();

  /// Same values, no history, no gradient requirement.
  Tensor detach() const;
  /// Deep copy of the values (no history).
  Tensor clone() const;

  /// Reverse-mode sweep from this scalar; see Tape.
  void backward() const;

  const std::shared_ptr<TensorImpl<T>>& impl_ptr() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<TensorImpl<T>> impl);

 private:
  TensorImpl<T>& impl() const;

  std::shared_ptr<TensorImpl<T>> impl_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Element-type conversion; the result is a fresh leaf.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> out(x.numel());
  auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(src[i]);
  return Tensor<To>(x.shape(), std::move(out));
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mssf
