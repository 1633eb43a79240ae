// SPDX-License-Identifier: Apache-2.0
// Elementwise ops, reductions, softmax.
#include <algorithm>
#include <cmath>

#include "mssf/autograd.hpp"
#include "mssf/ops.hpp"

namespace mssf {

using detail::check_finite;
using detail::record;
using detail::should_record;
using detail::wants_grad;

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <typename T>
void require_rank4(const Tensor<T>& x, const char* op) {
  if (x.rank() != 4)
    throw DimensionError(std::string(op) + ": expected [N,C,H,W], got " + shape_str(x.shape()));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  check_finite(out, "add");
  if (should_record({&a, &b})) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr();
    record(out, "add", {&a, &b}, [ai, bi](std::span<const T> g) {
      for (auto* p : {&ai, &bi}) {
        if (!wants_grad(*p)) continue;
        auto gi = (*p)->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  check_finite(out, "sub");
  if (should_record({&a, &b})) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr();
    record(out, "sub", {&a, &b}, [ai, bi](std::span<const T> g) {
      if (wants_grad(ai)) {
        auto ga = ai->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants_grad(bi)) {
        auto gb = bi->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  check_finite(out, "mul");
  if (should_record({&a, &b})) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr();
    record(out, "mul", {&a, &b}, [ai, bi](std::span<const T> g) {
      if (wants_grad(ai)) {
        auto ga = ai->grad_buffer();
        const auto& yb = bi->data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yb[i];
      }
      if (wants_grad(bi)) {
        auto gb = bi->grad_buffer();
        const auto& xa = ai->data;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xa[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto d = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = d[i] * factor;
  check_finite(out, "scale");
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "scale", {&x}, [xi, factor](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto o = out.mutable_data();
  auto d = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::abs(d[i]);
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "abs", {&x}, [xi](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      const auto& v = xi->data;
      // Subgradient 0 at ties.
      for (std::size_t i = 0; i < g.size(); ++i)
        gx[i] += v[i] > T(0) ? g[i] : (v[i] < T(0) ? -g[i] : T(0));
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul_channels(const Tensor<T>& x, const Tensor<T>& s) {
  require_rank4(x, "mul_channels");
  const auto& sh = x.shape();
  const std::size_t n = sh[0], c = sh[1], hw = sh[2] * sh[3];
  bool per_sample;
  if (s.numel() == c)
    per_sample = false;
  else if (s.numel() == n * c)
    per_sample = true;
  else
    throw DimensionError("mul_channels: scale of shape " + shape_str(s.shape()) +
                         " does not broadcast over " + shape_str(sh));
  Tensor<T> out(sh);
  auto o = out.mutable_data();
  auto xd = x.data();
  auto sd = s.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T f = sd[per_sample ? b * c + ch : ch];
      const std::size_t base = (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) o[base + p] = xd[base + p] * f;
    }
  check_finite(out, "mul_channels");
  if (should_record({&x, &s})) {
    auto xi = x.impl_ptr(), si = s.impl_ptr();
    record(out, "mul_channels", {&x, &s}, [xi, si, n, c, hw, per_sample](std::span<const T> g) {
      const auto& xd = xi->data;
      const auto& sd = si->data;
      if (wants_grad(xi)) {
        auto gx = xi->grad_buffer();
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T f = sd[per_sample ? b * c + ch : ch];
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p) gx[base + p] += g[base + p] * f;
          }
      }
      if (wants_grad(si)) {
        auto gs = si->grad_buffer();
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (b * c + ch) * hw;
            T acc = 0;
            for (std::size_t p = 0; p < hw; ++p) acc += g[base + p] * xd[base + p];
            gs[per_sample ? b * c + ch : ch] += acc;
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  auto out = Tensor<T>::scalar(acc);
  check_finite(out, "sum");
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "sum", {&x}, [xi](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      for (auto& v : gx) v += g[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw DimensionError("mean: empty tensor");
  T acc = 0;
  for (T v : x.data()) acc += v;
  const T inv = T(1) / static_cast<T>(x.numel());
  auto out = Tensor<T>::scalar(acc * inv);
  check_finite(out, "mean");
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "mean", {&x}, [xi, inv](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      const T v = g[0] * inv;
      for (auto& e : gx) e += v;
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank4(x, "global_avg_pool");
  const auto& sh = x.shape();
  const std::size_t nc = sh[0] * sh[1], hw = sh[2] * sh[3];
  if (hw == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  Tensor<T> out({sh[0], sh[1], 1, 1});
  auto o = out.mutable_data();
  auto d = x.data();
  const T inv = T(1) / static_cast<T>(hw);
  for (std::size_t i = 0; i < nc; ++i) {
    T acc = 0;
    for (std::size_t p = 0; p < hw; ++p) acc += d[i * hw + p];
    o[i] = acc * inv;
  }
  check_finite(out, "global_avg_pool");
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "global_avg_pool", {&x}, [xi, nc, hw, inv](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < nc; ++i) {
        const T v = g[i] * inv;
        for (std::size_t p = 0; p < hw; ++p) gx[i * hw + p] += v;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto& sh = x.shape();
  if (axis >= sh.size())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(sh));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sh[i];
  for (std::size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
  const std::size_t len = sh[axis];
  Tensor<T> out(sh);
  auto o = out.mutable_data();
  auto d = x.data();
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t base = a * len * inner + b;
      T mx = d[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, d[base + k * inner]);
      T total = 0;
      for (std::size_t k = 0; k < len; ++k) {
        const T e = std::exp(d[base + k * inner] - mx);
        o[base + k * inner] = e;
        total += e;
      }
      const T inv = T(1) / total;
      for (std::size_t k = 0; k < len; ++k) o[base + k * inner] *= inv;
    }
  check_finite(out, "softmax");
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    auto yi = out.impl_ptr();
    // Weak reference to the output avoids a cycle; the tape keeps it alive.
    std::weak_ptr<TensorImpl<T>> yw = yi;
    record(out, "softmax", {&x}, [xi, yw, outer, inner, len](std::span<const T> g) {
      auto yl = yw.lock();
      const auto& y = yl->data;
      auto gx = xi->grad_buffer();
      for (std::size_t a = 0; a < outer; ++a)
        for (std::size_t b = 0; b < inner; ++b) {
          const std::size_t base = a * len * inner + b;
          T dot = 0;
          for (std::size_t k = 0; k < len; ++k) dot += g[base + k * inner] * y[base + k * inner];
          for (std::size_t k = 0; k < len; ++k)
            gx[base + k * inner] += y[base + k * inner] * (g[base + k * inner] - dot);
        }
    });
  }
  return out;
}

#define MSSF_INSTANTIATE(T)                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> scale(const Tensor<T>&, T);                              \
  template Tensor<T> abs(const Tensor<T>&);                                   \
  template Tensor<T> mul_channels(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> sum(const Tensor<T>&);                                   \
  template Tensor<T> mean(const Tensor<T>&);                                  \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                       \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);

MSSF_INSTANTIATE(float)
MSSF_INSTANTIATE(double)
#undef MSSF_INSTANTIATE

}  // namespace mssf
