// SPDX-License-Identifier: Apache-2.0
#include "mssf/nn/param_store.hpp"

#include <cmath>
#include <random>

namespace mssf::nn {

template <typename T>
Tensor<T> ParamStore<T>::add(std::string name, Shape shape, Init init, std::size_t fan_in) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  if (init == Init::kaiming_normal && fan_in == 0) throw ConfigError("parameter " + name + " needs a fan-in");
  Tensor<T> t(std::move(shape), init == Init::ones ? T(1) : T(0));
  t.set_requires_grad(true);
  entries_.push_back({std::move(name), t, init, fan_in});
  return t;
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

template <typename T>
const Tensor<T>& ParamStore<T>::at(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw ConfigError("unknown parameter " + std::string(name));
}

template <typename T>
std::vector<Tensor<T>> ParamStore<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value);
  return out;
}

template <typename T>
std::size_t ParamStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template <typename T>
void ParamStore<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& e : entries_) {
    auto d = e.value.mutable_data();
    switch (e.init) {
      case Init::zeros:
        std::fill(d.begin(), d.end(), T(0));
        break;
      case Init::ones:
        std::fill(d.begin(), d.end(), T(1));
        break;
      case Init::kaiming_normal: {
        std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(e.fan_in)));
        for (auto& v : d) v = static_cast<T>(dist(rng));
        break;
      }
    }
  }
}

template <typename T>
void ParamStore<T>::set_requires_grad(bool on) {
  for (auto& e : entries_) e.value.set_requires_grad(on);
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace mssf::nn
