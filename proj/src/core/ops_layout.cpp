// SPDX-License-Identifier: Apache-2.0
// Rearrangements, batched matmul and bilinear resampling.
#include <algorithm>
#include <cmath>
#include <numeric>

#include "mssf/autograd.hpp"
#include "mssf/ops.hpp"

namespace mssf {

using detail::check_finite;
using detail::record;
using detail::should_record;
using detail::wants_grad;

namespace {

// Builds a differentiable gather: out[i] = in[index[i]], with index a
// permutation-like map (every out element reads exactly one input element).
template <typename T>
Tensor<T> gather(const Tensor<T>& x, Shape shape, std::vector<std::size_t> index, const char* name) {
  Tensor<T> out(std::move(shape));
  auto o = out.mutable_data();
  auto d = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = d[index[i]];
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, name, {&x}, [xi, index = std::move(index)](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[index[i]] += g[i];
    });
  }
  return out;
}

template <typename T>
void require_rank4(const Tensor<T>& x, const char* op) {
  if (x.rank() != 4)
    throw DimensionError(std::string(op) + ": expected [N,C,H,W], got " + shape_str(x.shape()));
}

}  // namespace

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t s) {
  require_rank4(x, "pixel_shuffle");
  if (s == 0) throw ConfigError("pixel_shuffle: scale must be positive");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (cin % (s * s) != 0)
    throw ConfigError("pixel_shuffle: channels " + std::to_string(cin) + " not divisible by s^2=" +
                      std::to_string(s * s));
  const std::size_t c = cin / (s * s), oh = h * s, ow = w * s;
  std::vector<std::size_t> index(x.numel());
  std::size_t k = 0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          const std::size_t i = y % s, j = xo % s;
          const std::size_t src_c = ch * s * s + i * s + j;
          index[k++] = ((b * cin + src_c) * h + y / s) * w + xo / s;
        }
  return gather(x, {n, c, oh, ow}, std::move(index), "pixel_shuffle");
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t s) {
  require_rank4(x, "pixel_unshuffle");
  if (s == 0) throw ConfigError("pixel_unshuffle: scale must be positive");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % s != 0 || w % s != 0)
    throw ConfigError("pixel_unshuffle: extents " + shape_str(x.shape()) + " not divisible by " +
                      std::to_string(s));
  const std::size_t oc = c * s * s, oh = h / s, ow = w / s;
  std::vector<std::size_t> index(x.numel());
  std::size_t k = 0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < oc; ++ch)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          const std::size_t src_c = ch / (s * s), i = (ch % (s * s)) / s, j = ch % s;
          index[k++] = ((b * c + src_c) * h + y * s + i) * w + xo * s + j;
        }
  return gather(x, {n, oc, oh, ow}, std::move(index), "pixel_unshuffle");
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: nothing to concatenate");
  for (const auto& p : parts) require_rank4(p, "concat_channels");
  const std::size_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3), hw = h * w;
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w)
      throw DimensionError("concat_channels: " + shape_str(p.shape()) + " incompatible with " +
                           shape_str(parts[0].shape()));
    c += p.dim(1);
  }
  Tensor<T> out({n, c, h, w});
  auto o = out.mutable_data();
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t pc = p.dim(1);
    auto d = p.data();
    for (std::size_t b = 0; b < n; ++b)
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(b * pc * hw), pc * hw,
                  o.begin() + static_cast<std::ptrdiff_t>((b * c + off) * hw));
    off += pc;
  }
  std::vector<const Tensor<T>*> ins;
  std::vector<std::shared_ptr<TensorImpl<T>>> impls;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    ins.push_back(&p);
    impls.push_back(p.impl_ptr());
    widths.push_back(p.dim(1));
  }
  bool any = false;
  if (grad_enabled())
    for (const auto& p : parts) any = any || p.requires_grad();
  if (any) {
    record(out, "concat_channels", ins,
           [impls, widths, offsets, n, c, hw](std::span<const T> g) {
             for (std::size_t k = 0; k < impls.size(); ++k) {
               if (!wants_grad(impls[k])) continue;
               auto gp = impls[k]->grad_buffer();
               const std::size_t pc = widths[k];
               for (std::size_t b = 0; b < n; ++b) {
                 const T* src = g.data() + (b * c + offsets[k]) * hw;
                 T* dst = gp.data() + b * pc * hw;
                 for (std::size_t i = 0; i < pc * hw; ++i) dst[i] += src[i];
               }
             }
           });
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank4(x, "slice_channels");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (begin >= end || end > c)
    throw DimensionError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + std::to_string(c) + " channels");
  const std::size_t sc = end - begin;
  Tensor<T> out({n, sc, x.dim(2), x.dim(3)});
  auto o = out.mutable_data();
  auto d = x.data();
  for (std::size_t b = 0; b < n; ++b)
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>((b * c + begin) * hw), sc * hw,
                o.begin() + static_cast<std::ptrdiff_t>(b * sc * hw));
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "slice_channels", {&x}, [xi, n, c, hw, begin, sc](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      for (std::size_t b = 0; b < n; ++b) {
        T* dst = gx.data() + (b * c + begin) * hw;
        const T* src = g.data() + b * sc * hw;
        for (std::size_t i = 0; i < sc * hw; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "reshape", {&x}, [xi](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::span<const std::size_t> order) {
  const auto& sh = x.shape();
  const std::size_t r = sh.size();
  if (order.size() != r) throw DimensionError("permute: order rank mismatch for " + shape_str(sh));
  std::vector<bool> used(r, false);
  for (auto a : order) {
    if (a >= r || used[a]) throw DimensionError("permute: invalid axis order");
    used[a] = true;
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * sh[i];
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = sh[order[i]];
  std::vector<std::size_t> index(x.numel());
  std::vector<std::size_t> coord(r, 0);
  for (std::size_t k = 0; k < index.size(); ++k) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += coord[i] * in_stride[order[i]];
    index[k] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++coord[i] < out_shape[i]) break;
      coord[i] = 0;
    }
  }
  return gather(x, std::move(out_shape), std::move(index), "permute");
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3)
    throw DimensionError("bmm: expected rank-3 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t nn = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t kb = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || kb != k)
    throw DimensionError("bmm: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         (transpose_b ? "^T" : ""));
  // b element (kk, j) of batch p
  auto bidx = [=](std::size_t p, std::size_t kk, std::size_t j) {
    return transpose_b ? (p * nn + j) * k + kk : (p * k + kk) * nn + j;
  };
  Tensor<T> out({batch, m, nn});
  {
    auto o = out.mutable_data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t p = 0; p < batch; ++p)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nn; ++j) {
          T acc = 0;
          for (std::size_t kk = 0; kk < k; ++kk) acc += ad[(p * m + i) * k + kk] * bd[bidx(p, kk, j)];
          o[(p * m + i) * nn + j] = acc;
        }
  }
  check_finite(out, "bmm");
  if (should_record({&a, &b})) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr();
    record(out, "bmm", {&a, &b}, [ai, bi, batch, m, k, nn, bidx](std::span<const T> g) {
      const auto& ad = ai->data;
      const auto& bd = bi->data;
      if (wants_grad(ai)) {
        auto ga = ai->grad_buffer();
        for (std::size_t p = 0; p < batch; ++p)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              T acc = 0;
              for (std::size_t j = 0; j < nn; ++j) acc += g[(p * m + i) * nn + j] * bd[bidx(p, kk, j)];
              ga[(p * m + i) * k + kk] += acc;
            }
      }
      if (wants_grad(bi)) {
        auto gb = bi->grad_buffer();
        for (std::size_t p = 0; p < batch; ++p)
          for (std::size_t kk = 0; kk < k; ++kk)
            for (std::size_t j = 0; j < nn; ++j) {
              T acc = 0;
              for (std::size_t i = 0; i < m; ++i) acc += ad[(p * m + i) * k + kk] * g[(p * m + i) * nn + j];
              gb[bidx(p, kk, j)] += acc;
            }
      }
    });
  }
  return out;
}

namespace {

struct Taps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> f;  // weight of i1
};

Taps bilinear_taps(std::size_t in, std::size_t s) {
  Taps t;
  const std::size_t out = in * s;
  t.i0.resize(out);
  t.i1.resize(out);
  t.f.resize(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) / static_cast<double>(s) - 0.5;
    if (src < 0) src = 0;
    std::size_t i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    t.i0[d] = i0;
    t.i1[d] = i1;
    t.f[d] = src - static_cast<double>(i0);
  }
  return t;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t s) {
  require_rank4(x, "bilinear_upsample");
  if (s == 0) throw ConfigError("bilinear_upsample: scale must be positive");
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h == 0 || w == 0) throw DimensionError("bilinear_upsample: empty input");
  const std::size_t oh = h * s, ow = w * s;
  const Taps ty = bilinear_taps(h, s), tx = bilinear_taps(w, s);
  Tensor<T> out({x.dim(0), x.dim(1), oh, ow});
  {
    auto o = out.mutable_data();
    auto d = x.data();
    for (std::size_t p = 0; p < nc; ++p) {
      const T* src = d.data() + p * h * w;
      T* dst = o.data() + p * oh * ow;
      for (std::size_t y = 0; y < oh; ++y) {
        const T fy = static_cast<T>(ty.f[y]);
        const T* r0 = src + ty.i0[y] * w;
        const T* r1 = src + ty.i1[y] * w;
        for (std::size_t xo = 0; xo < ow; ++xo) {
          const T fx = static_cast<T>(tx.f[xo]);
          const T top = r0[tx.i0[xo]] * (T(1) - fx) + r0[tx.i1[xo]] * fx;
          const T bot = r1[tx.i0[xo]] * (T(1) - fx) + r1[tx.i1[xo]] * fx;
          dst[y * ow + xo] = top * (T(1) - fy) + bot * fy;
        }
      }
    }
  }
  check_finite(out, "bilinear_upsample");
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "bilinear_upsample", {&x}, [xi, ty, tx, nc, h, w, oh, ow](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      for (std::size_t p = 0; p < nc; ++p) {
        T* dst = gx.data() + p * h * w;
        const T* src = g.data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const T fy = static_cast<T>(ty.f[y]);
          for (std::size_t xo = 0; xo < ow; ++xo) {
            const T fx = static_cast<T>(tx.f[xo]);
            const T v = src[y * ow + xo];
            dst[ty.i0[y] * w + tx.i0[xo]] += v * (T(1) - fy) * (T(1) - fx);
            dst[ty.i0[y] * w + tx.i1[xo]] += v * (T(1) - fy) * fx;
            dst[ty.i1[y] * w + tx.i0[xo]] += v * fy * (T(1) - fx);
            dst[ty.i1[y] * w + tx.i1[xo]] += v * fy * fx;
          }
        }
      }
    });
  }
  return out;
}

#define MSSF_INSTANTIATE(T)                                                             \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, std::size_t);                      \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, std::size_t);                    \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                       \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);        \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                  \
  template Tensor<T> permute(const Tensor<T>&, std::span<const std::size_t>);           \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                     \
  template Tensor<T> bilinear_upsample(const Tensor<T>&, std::size_t);

MSSF_INSTANTIATE(float)
MSSF_INSTANTIATE(double)
#undef MSSF_INSTANTIATE

}  // namespace mssf
