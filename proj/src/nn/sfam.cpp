// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "mssf/nn/blocks.hpp"

namespace mssf::nn {

namespace {

std::size_t reduced_width(std::size_t channels, std::size_t reduction) {
  if (reduction == 0) throw ConfigError("sfam: reduction ratio must be positive");
  const std::size_t raw = (channels + reduction - 1) / reduction;
  return std::max<std::size_t>(2, (raw + 1) / 2 * 2);
}

void check_views(const Shape& a, const Shape& b, std::size_t channels) {
  if (a != b) throw ConfigError("sfam: view shapes differ: " + shape_str(a) + " vs " + shape_str(b));
  if (a.size() != 4 || a[1] != channels)
    throw ConfigError("sfam: expected " + std::to_string(channels) + " channels, got " + shape_str(a));
}

// [N,C,H,W] -> [N*H, W, C] rows or [N, H*W, C] maps.
template <typename T>
Tensor<T> to_tokens(const Tensor<T>& x, AttentionScope scope) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto t = permute(x, {0, 2, 3, 1});
  return scope == AttentionScope::epipolar_row ? reshape(t, {n * h, w, c}) : reshape(t, {n, h * w, c});
}

template <typename T>
Tensor<T> from_tokens(const Tensor<T>& t, const Shape& shape) {
  return permute(reshape(t, {shape[0], shape[2], shape[3], shape[1]}), {0, 3, 1, 2});
}

}  // namespace

template <typename T>
Tensor<T> cross_attention(const Tensor<T>& query, const Tensor<T>& key, const Tensor<T>& value, AttentionScope scope,
                          Tensor<T>* weights) {
  if (query.shape() != key.shape() || query.shape() != value.shape() || query.rank() != 4)
    throw DimensionError("attention: query " + shape_str(query.shape()) + ", key " + shape_str(key.shape()) +
                         ", value " + shape_str(value.shape()) + " must share one [N,C,H,W] shape");
  const T temperature = static_cast<T>(std::sqrt(static_cast<double>(query.dim(1))));
  const auto scores = scale(bmm(to_tokens(query, scope), to_tokens(key, scope), true), T(1) / temperature);
  const auto attn = softmax(scores, 2);
  if (weights) *weights = attn;
  return from_tokens(bmm(attn, to_tokens(value, scope)), query.shape());
}

template <typename T>
SelectiveFusionAttention<T>::SelectiveFusionAttention(ParamStore<T>& store, const std::string& prefix,
                                                      std::size_t channels, const SfamOptions& opts)
    : channels_(channels), opts_(opts) {
  norm_left_ = Norm<T>(store, prefix + ".norm_left", channels);
  norm_right_ = Norm<T>(store, prefix + ".norm_right", channels);
  if (opts.selection) {
    const std::size_t reduced = reduced_width(channels, opts.reduction);
    down_ = Conv<T>(store, prefix + ".down", channels, reduced);
    desc_left_ = Conv<T>(store, prefix + ".desc_left", reduced / 2, channels);
    desc_right_ = Conv<T>(store, prefix + ".desc_right", reduced / 2, channels);
  }
  value_left_ = Conv<T>(store, prefix + ".value_left", channels, channels);
  value_right_ = Conv<T>(store, prefix + ".value_right", channels, channels);
  lambda_left_ = store.add(prefix + ".lambda_left", {channels}, Init::zeros);
  lambda_right_ = store.add(prefix + ".lambda_right", {channels}, Init::zeros);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SelectiveFusionAttention<T>::descriptors(const Tensor<T>& left,
                                                                         const Tensor<T>& right) const {
  check_views(left.shape(), right.shape(), channels_);
  if (!opts_.selection) throw UsageError("sfam: descriptors requested with selection disabled");
  const auto joint = add(norm_left_(left), norm_right_(right));
  const auto compact = simple_gate(down_(global_avg_pool(joint)));
  return {softmax(desc_left_(compact), 1), softmax(desc_right_(compact), 1)};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SelectiveFusionAttention<T>::select(const Tensor<T>& left,
                                                                    const Tensor<T>& right) const {
  check_views(left.shape(), right.shape(), channels_);
  const auto nl = norm_left_(left);
  const auto nr = norm_right_(right);
  if (!opts_.selection) return {nl, nr};
  const auto compact = simple_gate(down_(global_avg_pool(add(nl, nr))));
  const auto dl = softmax(desc_left_(compact), 1);
  const auto dr = softmax(desc_right_(compact), 1);
  return {add(nl, mul_channels(nl, dl)), add(nr, mul_channels(nr, dr))};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SelectiveFusionAttention<T>::attend_fuse(const Tensor<T>& left,
                                                                         const Tensor<T>& right,
                                                                         const Tensor<T>& query_left,
                                                                         const Tensor<T>& query_right,
                                                                         AttentionTrace<T>* trace) const {
  check_views(left.shape(), right.shape(), channels_);
  check_views(query_left.shape(), left.shape(), channels_);
  check_views(query_right.shape(), left.shape(), channels_);
  const auto value_left = value_left_(left);
  const auto value_right = value_right_(right);
  Tensor<T>* into_left = trace ? &trace->into_left : nullptr;
  Tensor<T>* into_right = trace ? &trace->into_right : nullptr;

  Tensor<T> to_left, to_right;
  if (opts_.variant == SfamVariant::conventional) {
    to_left = cross_attention(query_left, query_right, value_right, opts_.scope, into_left);
    to_right = cross_attention(query_right, query_left, value_left, opts_.scope, into_right);
  } else {
    // Literal reading: each view's value is attended with its own query against
    // the other view's key, and the result is fused into the other view.
    to_right = cross_attention(query_left, query_right, value_left, opts_.scope, into_right);
    to_left = cross_attention(query_right, query_left, value_right, opts_.scope, into_left);
  }
  return {add(left, mul_channels(to_left, lambda_left_)), add(right, mul_channels(to_right, lambda_right_))};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SelectiveFusionAttention<T>::operator()(const Tensor<T>& left,
                                                                        const Tensor<T>& right,
                                                                        AttentionTrace<T>* trace) const {
  const auto [ql, qr] = select(left, right);
  return attend_fuse(left, right, ql, qr, trace);
}

template Tensor<float> cross_attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                       AttentionScope, Tensor<float>*);
template Tensor<double> cross_attention(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                        AttentionScope, Tensor<double>*);
template class SelectiveFusionAttention<float>;
template class SelectiveFusionAttention<double>;

}  // namespace mssf::nn
