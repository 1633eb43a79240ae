// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mssf/tensor.hpp"

namespace mssf::nn {

enum class Init : std::uint8_t { kaiming_normal, zeros, ones };

/// Named, ordered collection of learnable tensors. Registration order is the
/// initialization order, so a seed fully determines every value.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Init init;
    std::size_t fan_in;
  };

  /// Registers a new parameter. Zeros/ones are filled immediately; random
  /// entries stay zero until `initialize`. Duplicate names are a ConfigError.
  Tensor<T> add(std::string name, Shape shape, Init init, std::size_t fan_in = 0);

  bool contains(std::string_view name) const;
  const Tensor<T>& at(std::string_view name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Tensor<T>> tensors() const;

  /// Total element count.
  std::size_t count() const;

  /// Fan-in normal for conv weights (std = sqrt(1 / fan_in), the linear-gain
  /// Kaiming rule, since the blocks gate by multiplication rather than ReLU),
  /// zeros and ones as declared. Draws happen in registration order.
  void initialize(std::uint64_t seed);

  /// Copies values by name from another store of identical layout.
  template <typename U>
  void copy_values_from(const ParamStore<U>& other);

  void set_requires_grad(bool on);
  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

template <typename T>
template <typename U>
void ParamStore<T>::copy_values_from(const ParamStore<U>& other) {
  if (other.entries().size() != entries_.size())
    throw ConfigError("parameter stores differ in size: " + std::to_string(other.entries().size()) + " vs " +
                      std::to_string(entries_.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries()[i];
    auto& dst = entries_[i];
    if (src.name != dst.name || src.value.shape() != dst.value.shape())
      throw ConfigError("parameter layout mismatch at " + dst.name + " (other has " + src.name + " " +
                        shape_str(src.value.shape()) + ")");
    auto d = dst.value.mutable_data();
    auto s = src.value.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = static_cast<T>(s[k]);
  }
}

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace mssf::nn
