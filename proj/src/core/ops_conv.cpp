// SPDX-License-Identifier: Apache-2.0
// Direct grouped convolution and channel layer normalization.
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

struct ConvGeometry {
  std::size_t n, cin, h, w;
  std::size_t cout, kh, kw;
  std::size_t oh, ow;
  std::size_t stride, pad, groups;
  std::size_t cin_g, cout_g;

  // Output columns [lo, hi) whose input column ox*stride - pad + kx is in range.
  void col_range(std::size_t kx, std::size_t& lo, std::size_t& hi) const {
    // ix = ox*stride + kx - pad >= 0  <=>  ox >= ceil((pad - kx) / stride)
    lo = kx >= pad ? 0 : (pad - kx + stride - 1) / stride;
    // ix < w  <=>  ox*stride < w + pad - kx
    const std::size_t lim = w + pad;
    hi = lim <= kx ? 0 : std::min(ow, (lim - kx + stride - 1) / stride);
    if (hi < lo) hi = lo;
  }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& wt, const Tensor<T>& bias,
                           const Conv2dOptions& o) {
  if (x.rank() != 4) throw DimensionError("conv2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (wt.rank() != 4)
    throw DimensionError("conv2d: weight must be [Cout,Cin/g,kh,kw], got " + shape_str(wt.shape()));
  if (o.groups == 0 || o.stride == 0) throw ConfigError("conv2d: stride and groups must be positive");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = wt.dim(0);
  g.kh = wt.dim(2);
  g.kw = wt.dim(3);
  g.stride = o.stride;
  g.pad = o.padding;
  g.groups = o.groups;
  if (g.cin % g.groups != 0)
    throw ConfigError("conv2d: groups=" + std::to_string(g.groups) + " does not divide Cin=" +
                      std::to_string(g.cin));
  if (g.cout % g.groups != 0)
    throw ConfigError("conv2d: groups=" + std::to_string(g.groups) + " does not divide Cout=" +
                      std::to_string(g.cout));
  g.cin_g = g.cin / g.groups;
  g.cout_g = g.cout / g.groups;
  if (wt.dim(1) != g.cin_g)
    throw DimensionError("conv2d: weight expects " + std::to_string(wt.dim(1)) +
                         " input channels per group, input provides " + std::to_string(g.cin_g));
  if (bias.defined() && bias.numel() != g.cout)
    throw DimensionError("conv2d: bias has " + std::to_string(bias.numel()) + " entries for Cout=" +
                         std::to_string(g.cout));
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw)
    throw DimensionError("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

// out[oc] += w[oc, icl] (*) in[ic] over all kernel taps, for one (n, oc, ic) triple.
template <typename T>
inline void correlate_plane(const ConvGeometry& g, const T* in, const T* wk, T* out) {
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      const T wv = wk[ky * g.kw + kx];
      if (wv == T(0)) continue;
      std::size_t lo, hi;
      g.col_range(kx, lo, hi);
      if (lo >= hi) continue;
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        const T* src = in + static_cast<std::size_t>(iy) * g.w;
        T* dst = out + oy * g.ow;
        if (g.stride == 1) {
          const T* s = src + (lo + kx - g.pad);
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] += wv * s[ox - lo];
        } else {
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] += wv * src[ox * g.stride + kx - g.pad];
        }
      }
    }
  }
}

// gin[ic] += w[oc, icl] (*)^T gout[oc]
template <typename T>
inline void correlate_plane_transposed(const ConvGeometry& g, const T* gout, const T* wk, T* gin) {
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      const T wv = wk[ky * g.kw + kx];
      if (wv == T(0)) continue;
      std::size_t lo, hi;
      g.col_range(kx, lo, hi);
      if (lo >= hi) continue;
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        T* dst = gin + static_cast<std::size_t>(iy) * g.w;
        const T* src = gout + oy * g.ow;
        if (g.stride == 1) {
          T* d = dst + (lo + kx - g.pad);
          for (std::size_t ox = lo; ox < hi; ++ox) d[ox - lo] += wv * src[ox];
        } else {
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * g.stride + kx - g.pad] += wv * src[ox];
        }
      }
    }
  }
}

// gw[oc, icl, ky, kx] += sum gout[oc] * shifted in[ic]
template <typename T>
inline void accumulate_weight_grad(const ConvGeometry& g, const T* in, const T* gout, T* gwk) {
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      std::size_t lo, hi;
      g.col_range(kx, lo, hi);
      if (lo >= hi) continue;
      T acc = 0;
      for (std::size_t oy = 0; oy < g.oh; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        const T* src = in + static_cast<std::size_t>(iy) * g.w;
        const T* go = gout + oy * g.ow;
        T row = 0;
        if (g.stride == 1) {
          const T* s = src + (lo + kx - g.pad);
          for (std::size_t ox = lo; ox < hi; ++ox) row += go[ox] * s[ox - lo];
        } else {
          for (std::size_t ox = lo; ox < hi; ++ox) row += go[ox] * src[ox * g.stride + kx - g.pad];
        }
        acc += row;
      }
      gwk[ky * g.kw + kx] += acc;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opts) {
  const ConvGeometry g = conv_geometry(input, weight, bias, opts);
  Tensor<T> out({g.n, g.cout, g.oh, g.ow});
  const std::size_t in_plane = g.h * g.w, out_plane = g.oh * g.ow, ksz = g.kh * g.kw;
  {
    const T* x = input.data().data();
    const T* wt = weight.data().data();
    const T* b = bias.defined() ? bias.data().data() : nullptr;
    T* o = out.mutable_data().data();
    const std::ptrdiff_t jobs = static_cast<std::ptrdiff_t>(g.n * g.cout);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t job = 0; job < jobs; ++job) {
      const std::size_t n = static_cast<std::size_t>(job) / g.cout;
      const std::size_t oc = static_cast<std::size_t>(job) % g.cout;
      const std::size_t grp = oc / g.cout_g;
      T* dst = o + (n * g.cout + oc) * out_plane;
      std::fill(dst, dst + out_plane, b ? b[oc] : T(0));
      for (std::size_t icl = 0; icl < g.cin_g; ++icl) {
        const std::size_t ic = grp * g.cin_g + icl;
        correlate_plane(g, x + (n * g.cin + ic) * in_plane, wt + (oc * g.cin_g + icl) * ksz, dst);
      }
    }
  }
  check_finite(out, "conv2d");
  if (should_record({&input, &weight, &bias})) {
    auto xi = input.impl_ptr(), wi = weight.impl_ptr(), bi = bias.impl_ptr();
    std::vector<const Tensor<T>*> ins{&input, &weight};
    if (bias.defined()) ins.push_back(&bias);
    record(out, "conv2d", ins, [xi, wi, bi, g, in_plane, out_plane, ksz](std::span<const T> gout) {
      const T* go = gout.data();
      if (wants_grad(xi)) {
        T* gx = xi->grad_buffer().data();
        const T* wt = wi->data.data();
        const std::ptrdiff_t jobs = static_cast<std::ptrdiff_t>(g.n * g.cin);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t job = 0; job < jobs; ++job) {
          const std::size_t n = static_cast<std::size_t>(job) / g.cin;
          const std::size_t ic = static_cast<std::size_t>(job) % g.cin;
          const std::size_t grp = ic / g.cin_g, icl = ic % g.cin_g;
          T* dst = gx + (n * g.cin + ic) * in_plane;
          for (std::size_t ocl = 0; ocl < g.cout_g; ++ocl) {
            const std::size_t oc = grp * g.cout_g + ocl;
            correlate_plane_transposed(g, go + (n * g.cout + oc) * out_plane,
                                       wt + (oc * g.cin_g + icl) * ksz, dst);
          }
        }
      }
      if (wants_grad(wi)) {
        T* gw = wi->grad_buffer().data();
        const T* x = xi->data.data();
        const std::ptrdiff_t jobs = static_cast<std::ptrdiff_t>(g.cout);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t job = 0; job < jobs; ++job) {
          const std::size_t oc = static_cast<std::size_t>(job);
          const std::size_t grp = oc / g.cout_g;
          for (std::size_t icl = 0; icl < g.cin_g; ++icl) {
            const std::size_t ic = grp * g.cin_g + icl;
            for (std::size_t n = 0; n < g.n; ++n)
              accumulate_weight_grad(g, x + (n * g.cin + ic) * in_plane,
                                     go + (n * g.cout + oc) * out_plane,
                                     gw + (oc * g.cin_g + icl) * ksz);
          }
        }
      }
      if (wants_grad(bi)) {
        auto gb = bi->grad_buffer();
        for (std::size_t oc = 0; oc < g.cout; ++oc) {
          T acc = 0;
          for (std::size_t n = 0; n < g.n; ++n) {
            const T* p = go + (n * g.cout + oc) * out_plane;
            for (std::size_t i = 0; i < out_plane; ++i) acc += p[i];
          }
          gb[oc] += acc;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.rank() != 4) throw DimensionError("layer_norm: expected [N,C,H,W], got " + shape_str(x.shape()));
  if (!(eps > T(0))) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c)
    throw DimensionError("layer_norm: gamma/beta must have " + std::to_string(c) + " entries");
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(n * hw);
  {
    const T* xd = x.data().data();
    const T* gd = gamma.data().data();
    const T* bd = beta.data().data();
    T* o = out.mutable_data().data();
    std::vector<T> mu(hw), var(hw);
    const T inv_c = T(1) / static_cast<T>(c);
    for (std::size_t b = 0; b < n; ++b) {
      const T* xb = xd + b * c * hw;
      std::fill(mu.begin(), mu.end(), T(0));
      std::fill(var.begin(), var.end(), T(0));
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) mu[p] += xb[ch * hw + p];
      for (std::size_t p = 0; p < hw; ++p) mu[p] *= inv_c;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) {
          const T d = xb[ch * hw + p] - mu[p];
          var[p] += d * d;
        }
      T* rs = rstd.data() + b * hw;
      for (std::size_t p = 0; p < hw; ++p) rs[p] = T(1) / std::sqrt(var[p] * inv_c + eps);
      for (std::size_t ch = 0; ch < c; ++ch) {
        T* xh = xhat.data() + (b * c + ch) * hw;
        T* ob = o + (b * c + ch) * hw;
        for (std::size_t p = 0; p < hw; ++p) {
          xh[p] = (xb[ch * hw + p] - mu[p]) * rs[p];
          ob[p] = gd[ch] * xh[p] + bd[ch];
        }
      }
    }
  }
  check_finite(out, "layer_norm");
  if (should_record({&x, &gamma, &beta})) {
    auto xi = x.impl_ptr(), gi = gamma.impl_ptr(), bi = beta.impl_ptr();
    record(out, "layer_norm", {&x, &gamma, &beta},
           [xi, gi, bi, n, c, hw, xhat = std::move(xhat), rstd = std::move(rstd)](std::span<const T> g) {
             const T* gy = g.data();
             if (wants_grad(gi) || wants_grad(bi)) {
               auto gg = gi->grad_buffer();
               auto gb = bi->grad_buffer();
               for (std::size_t ch = 0; ch < c; ++ch) {
                 T ag = 0, ab = 0;
                 for (std::size_t b = 0; b < n; ++b) {
                   const std::size_t base = (b * c + ch) * hw;
                   for (std::size_t p = 0; p < hw; ++p) {
                     ag += gy[base + p] * xhat[base + p];
                     ab += gy[base + p];
                   }
                 }
                 if (wants_grad(gi)) gg[ch] += ag;
                 if (wants_grad(bi)) gb[ch] += ab;
               }
             }
             if (wants_grad(xi)) {
               auto gx = xi->grad_buffer();
               const T* gd = gi->data.data();
               const T inv_c = T(1) / static_cast<T>(c);
               std::vector<T> m1(hw), m2(hw);
               for (std::size_t b = 0; b < n; ++b) {
                 std::fill(m1.begin(), m1.end(), T(0));
                 std::fill(m2.begin(), m2.end(), T(0));
                 for (std::size_t ch = 0; ch < c; ++ch) {
                   const std::size_t base = (b * c + ch) * hw;
                   for (std::size_t p = 0; p < hw; ++p) {
                     const T gh = gy[base + p] * gd[ch];
                     m1[p] += gh;
                     m2[p] += gh * xhat[base + p];
                   }
                 }
                 const T* rs = rstd.data() + b * hw;
                 for (std::size_t ch = 0; ch < c; ++ch) {
                   const std::size_t base = (b * c + ch) * hw;
                   for (std::size_t p = 0; p < hw; ++p) {
                     const T gh = gy[base + p] * gd[ch];
                     gx[base + p] += rs[p] * (gh - m1[p] * inv_c - xhat[base + p] * m2[p] * inv_c);
                   }
                 }
               }
             }
           });
  }
  return out;
}

#define MSSF_INSTANTIATE(T)                                                                      \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions); \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);

MSSF_INSTANTIATE(float)
MSSF_INSTANTIATE(double)
#undef MSSF_INSTANTIATE

}  // namespace mssf
