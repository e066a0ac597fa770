/* Copyright 2026 The rescomp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Convolution and transposed convolution via im2col + GEMM.

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "rescomp/ops.hpp"

namespace rescomp {

ConvGeometry ConvGeometry::same(std::int64_t in_h, std::int64_t in_w,
                                std::int64_t k_h, std::int64_t k_w,
                                std::int64_t stride) {
  ConvGeometry g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.k_h = k_h;
  g.k_w = k_w;
  g.stride = stride;
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const std::int64_t pad_h = std::max<std::int64_t>((g.out_h - 1) * stride + k_h - in_h, 0);
  const std::int64_t pad_w = std::max<std::int64_t>((g.out_w - 1) * stride + k_w - in_w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

ConvGeometry ConvGeometry::valid(std::int64_t in_h, std::int64_t in_w,
                                 std::int64_t k_h, std::int64_t k_w,
                                 std::int64_t stride) {
  ConvGeometry g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.k_h = k_h;
  g.k_w = k_w;
  g.stride = stride;
  g.out_h = in_h >= k_h ? (in_h - k_h) / stride + 1 : 0;
  g.out_w = in_w >= k_w ? (in_w - k_w) / stride + 1 : 0;
  return g;
}

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using StridedMap = Eigen::Map<RowMat<Real>, 0, Eigen::OuterStride<>>;
template <typename Real>
using ConstStridedMap = Eigen::Map<const RowMat<Real>, 0, Eigen::OuterStride<>>;

// Bounds the im2col scratch buffer to roughly 32 MB of floats.
constexpr std::int64_t kColumnBudget = std::int64_t{8} << 20;

std::int64_t rows_per_chunk(std::int64_t k, const ConvGeometry& g) {
  const std::int64_t per_row = std::max<std::int64_t>(k * g.out_w, 1);
  return std::clamp<std::int64_t>(kColumnBudget / per_row, 1, std::max<std::int64_t>(g.out_h, 1));
}

// Gathers receptive fields for output rows [r0, r1) of one sample into
// col (channels*kh*kw x (r1-r0)*out_w).
template <typename Real>
void im2col(const Real* x, std::int64_t channels, const ConvGeometry& g,
            std::int64_t r0, std::int64_t r1, Real* col) {
  const std::int64_t cols = (r1 - r0) * g.out_w;
  for (std::int64_t c = 0; c < channels; ++c) {
    const Real* plane = x + c * g.in_h * g.in_w;
    for (std::int64_t i = 0; i < g.k_h; ++i) {
      for (std::int64_t j = 0; j < g.k_w; ++j) {
        Real* dst = col + ((c * g.k_h + i) * g.k_w + j) * cols;
        for (std::int64_t oy = r0; oy < r1; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad_top + i;
          Real* row = dst + (oy - r0) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(row, row + g.out_w, Real(0));
            continue;
          }
          const Real* src = plane + iy * g.in_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad_left + j;
            row[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : Real(0);
          }
        }
      }
    }
  }
}

// Scatter-adds col back into the image it was gathered from.
template <typename Real>
void col2im(const Real* col, std::int64_t channels, const ConvGeometry& g,
            std::int64_t r0, std::int64_t r1, Real* x) {
  const std::int64_t cols = (r1 - r0) * g.out_w;
  for (std::int64_t c = 0; c < channels; ++c) {
    Real* plane = x + c * g.in_h * g.in_w;
    for (std::int64_t i = 0; i < g.k_h; ++i) {
      for (std::int64_t j = 0; j < g.k_w; ++j) {
        const Real* src = col + ((c * g.k_h + i) * g.k_w + j) * cols;
        for (std::int64_t oy = r0; oy < r1; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad_top + i;
          if (iy < 0 || iy >= g.in_h) continue;
          const Real* row = src + (oy - r0) * g.out_w;
          Real* dst = plane + iy * g.in_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad_left + j;
            if (ix >= 0 && ix < g.in_w) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const char* op, const Shape& x, const Shape& w,
                       std::int64_t weight_in_channels, const Shape* bias,
                       std::int64_t out_channels, int stride) {
  if (stride <= 0) {
    throw std::invalid_argument(std::string(op) + ": stride must be positive");
  }
  if (x.c != weight_in_channels) {
    throw std::invalid_argument(std::string(op) + ": input " + x.to_string() +
                                " has " + std::to_string(x.c) +
                                " channels but weight " + w.to_string() +
                                " expects " +
                                std::to_string(weight_in_channels));
  }
  if (bias != nullptr && !(*bias == Shape{1, out_channels, 1, 1})) {
    throw std::invalid_argument(std::string(op) + ": bias " +
                                bias->to_string() + " does not match weight " +
                                w.to_string());
  }
}

template <typename Real>
void add_bias(Tensor<Real>& out, const Tensor<Real>& bias) {
  const Shape s = out.shape();
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      Real* p = out.plane(n, c);
      const Real b = bias[c];
      for (std::int64_t i = 0; i < s.plane(); ++i) p[i] += b;
    }
  }
}

template <typename Real>
void accumulate_bias_grad(const Tensor<Real>& grad_out, Tensor<Real>& grad_bias) {
  const Shape s = grad_out.shape();
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const Real* p = grad_out.plane(n, c);
      double acc = 0;
      for (std::int64_t i = 0; i < s.plane(); ++i) acc += p[i];
      grad_bias[c] += static_cast<Real>(acc);
    }
  }
}

}  // namespace

template <typename Real>
Var<Real> conv2d(const Var<Real>& x, const Var<Real>& weight,
                 const Var<Real>& bias, int stride, Padding padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape bias_shape = bias.defined() ? bias.shape() : Shape{};
  check_conv_shapes("conv2d", xs, ws, ws.c, bias.defined() ? &bias_shape : nullptr,
                    ws.n, stride);
  const ConvGeometry g =
      padding == Padding::kSame
          ? ConvGeometry::same(xs.h, xs.w, ws.h, ws.w, stride)
          : ConvGeometry::valid(xs.h, xs.w, ws.h, ws.w, stride);
  const std::int64_t c_out = ws.n;
  const std::int64_t k = ws.c * ws.h * ws.w;
  Tensor<Real> out(Shape{xs.n, c_out, g.out_h, g.out_w});
  const std::int64_t chunk = rows_per_chunk(k, g);
  std::vector<Real> col(static_cast<std::size_t>(k * chunk * g.out_w));
  Eigen::Map<const RowMat<Real>> wm(weight.value().raw(), c_out, k);
  const std::int64_t out_plane = g.out_h * g.out_w;
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t r0 = 0; r0 < g.out_h; r0 += chunk) {
      const std::int64_t r1 = std::min(r0 + chunk, g.out_h);
      const std::int64_t p = (r1 - r0) * g.out_w;
      im2col(x.value().plane(n, 0), xs.c, g, r0, r1, col.data());
      Eigen::Map<const RowMat<Real>> cm(col.data(), k, p);
      StridedMap<Real> om(out.plane(n, 0) + r0 * g.out_w, c_out, p,
                          Eigen::OuterStride<>(out_plane));
      om.noalias() = wm * cm;
    }
  }
  if (bias.defined()) add_bias(out, bias.value());

  return make_op<Real>(
      "conv2d", std::move(out), {x, weight, bias}, [g](Node<Real>& self) {
        Node<Real>& nx = *self.inputs[0];
        Node<Real>& nw = *self.inputs[1];
        Node<Real>& nb = *self.inputs[2];
        const Shape xs = nx.value.shape();
        const Shape ws = nw.value.shape();
        const std::int64_t c_out = ws.n;
        const std::int64_t k = ws.c * ws.h * ws.w;
        const std::int64_t out_plane = g.out_h * g.out_w;
        const std::int64_t chunk = rows_per_chunk(k, g);
        std::vector<Real> col(static_cast<std::size_t>(k * chunk * g.out_w));
        Eigen::Map<const RowMat<Real>> wm(nw.value.raw(), c_out, k);
        for (std::int64_t n = 0; n < xs.n; ++n) {
          for (std::int64_t r0 = 0; r0 < g.out_h; r0 += chunk) {
            const std::int64_t r1 = std::min(r0 + chunk, g.out_h);
            const std::int64_t p = (r1 - r0) * g.out_w;
            ConstStridedMap<Real> gm(self.grad.plane(n, 0) + r0 * g.out_w,
                                     c_out, p, Eigen::OuterStride<>(out_plane));
            if (nw.requires_grad) {
              im2col(nx.value.plane(n, 0), xs.c, g, r0, r1, col.data());
              Eigen::Map<const RowMat<Real>> cm(col.data(), k, p);
              Eigen::Map<RowMat<Real>> gw(nw.grad_buffer().raw(), c_out, k);
              gw.noalias() += gm * cm.transpose();
            }
            if (nx.requires_grad) {
              Eigen::Map<RowMat<Real>> cm(col.data(), k, p);
              cm.noalias() = wm.transpose() * gm;
              col2im(col.data(), xs.c, g, r0, r1, nx.grad_buffer().plane(n, 0));
            }
          }
        }
        if (nb.requires_grad) accumulate_bias_grad(self.grad, nb.grad_buffer());
      });
}

template <typename Real>
Var<Real> conv_transpose2d(const Var<Real>& x, const Var<Real>& weight,
                           const Var<Real>& bias, int stride) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape bias_shape = bias.defined() ? bias.shape() : Shape{};
  check_conv_shapes("conv_transpose2d", xs, ws, ws.n,
                    bias.defined() ? &bias_shape : nullptr, ws.c, stride);
  // Geometry of the forward conv this op is the adjoint of: it maps the
  // (H*s, W*s) output back onto the (H, W) input.
  const ConvGeometry g =
      ConvGeometry::same(xs.h * stride, xs.w * stride, ws.h, ws.w, stride);
  const std::int64_t c_in = ws.n;
  const std::int64_t c_out = ws.c;
  const std::int64_t k = c_out * ws.h * ws.w;
  Tensor<Real> out(Shape{xs.n, c_out, g.in_h, g.in_w});
  const std::int64_t chunk = rows_per_chunk(k, g);
  std::vector<Real> col(static_cast<std::size_t>(k * chunk * g.out_w));
  Eigen::Map<const RowMat<Real>> wm(weight.value().raw(), c_in, k);
  const std::int64_t in_plane = xs.h * xs.w;
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t r0 = 0; r0 < g.out_h; r0 += chunk) {
      const std::int64_t r1 = std::min(r0 + chunk, g.out_h);
      const std::int64_t p = (r1 - r0) * g.out_w;
      ConstStridedMap<Real> xm(x.value().plane(n, 0) + r0 * xs.w, c_in, p,
                               Eigen::OuterStride<>(in_plane));
      Eigen::Map<RowMat<Real>> cm(col.data(), k, p);
      cm.noalias() = wm.transpose() * xm;
      col2im(col.data(), c_out, g, r0, r1, out.plane(n, 0));
    }
  }
  if (bias.defined()) add_bias(out, bias.value());

  return make_op<Real>(
      "conv_transpose2d", std::move(out), {x, weight, bias},
      [g](Node<Real>& self) {
        Node<Real>& nx = *self.inputs[0];
        Node<Real>& nw = *self.inputs[1];
        Node<Real>& nb = *self.inputs[2];
        const Shape xs = nx.value.shape();
        const Shape ws = nw.value.shape();
        const std::int64_t c_in = ws.n;
        const std::int64_t c_out = ws.c;
        const std::int64_t k = c_out * ws.h * ws.w;
        const std::int64_t in_plane = xs.h * xs.w;
        const std::int64_t chunk = rows_per_chunk(k, g);
        std::vector<Real> col(static_cast<std::size_t>(k * chunk * g.out_w));
        Eigen::Map<const RowMat<Real>> wm(nw.value.raw(), c_in, k);
        for (std::int64_t n = 0; n < xs.n; ++n) {
          for (std::int64_t r0 = 0; r0 < g.out_h; r0 += chunk) {
            const std::int64_t r1 = std::min(r0 + chunk, g.out_h);
            const std::int64_t p = (r1 - r0) * g.out_w;
            im2col(self.grad.plane(n, 0), c_out, g, r0, r1, col.data());
            Eigen::Map<const RowMat<Real>> cm(col.data(), k, p);
            if (nx.requires_grad) {
              StridedMap<Real> gx(nx.grad_buffer().plane(n, 0) + r0 * xs.w,
                                  c_in, p, Eigen::OuterStride<>(in_plane));
              gx.noalias() += wm * cm;
            }
            if (nw.requires_grad) {
              ConstStridedMap<Real> xm(nx.value.plane(n, 0) + r0 * xs.w, c_in,
                                       p, Eigen::OuterStride<>(in_plane));
              Eigen::Map<RowMat<Real>> gw(nw.grad_buffer().raw(), c_in, k);
              gw.noalias() += xm * cm.transpose();
            }
          }
        }
        if (nb.requires_grad) accumulate_bias_grad(self.grad, nb.grad_buffer());
      });
}

template Var<float> conv2d(const Var<float>&, const Var<float>&,
                           const Var<float>&, int, Padding);
template Var<double> conv2d(const Var<double>&, const Var<double>&,
                            const Var<double>&, int, Padding);
template Var<float> conv_transpose2d(const Var<float>&, const Var<float>&,
                                     const Var<float>&, int);
template Var<double> conv_transpose2d(const Var<double>&, const Var<double>&,
                                      const Var<double>&, int);

}  // namespace rescomp
