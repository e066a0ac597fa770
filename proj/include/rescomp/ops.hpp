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

// Differentiable tensor operations. All ops are defined for float and double.

#ifndef RESCOMP_OPS_HPP_
#define RESCOMP_OPS_HPP_

#include <cstdint>
#include <vector>

#include "rescomp/autograd.hpp"

namespace rescomp {

template <typename Real>
Var<Real> constant(Tensor<Real> value) {
  return Var<Real>(std::move(value), false);
}

// A copy of the value that blocks gradient flow.
template <typename Real>
Var<Real> detach(const Var<Real>& x) {
  return Var<Real>(x.value(), false);
}

// Elementwise, shapes must match.
template <typename Real> Var<Real> add(const Var<Real>& a, const Var<Real>& b);
template <typename Real> Var<Real> sub(const Var<Real>& a, const Var<Real>& b);
template <typename Real> Var<Real> mul(const Var<Real>& a, const Var<Real>& b);
template <typename Real> Var<Real> div(const Var<Real>& a, const Var<Real>& b);

template <typename Real> Var<Real> scale(const Var<Real>& x, Real s);
template <typename Real> Var<Real> add_scalar(const Var<Real>& x, Real s);
template <typename Real> Var<Real> square(const Var<Real>& x);
template <typename Real> Var<Real> sqrt(const Var<Real>& x);
template <typename Real> Var<Real> exp(const Var<Real>& x);
template <typename Real> Var<Real> log(const Var<Real>& x);
template <typename Real> Var<Real> relu(const Var<Real>& x);
template <typename Real> Var<Real> pow_scalar(const Var<Real>& x, Real p);
// max(x, slope * x) for 0 <= slope <= 1.
template <typename Real> Var<Real> leaky_relu(const Var<Real>& x, Real slope);
// Gradient passes only strictly inside (lo, hi).
template <typename Real> Var<Real> clamp(const Var<Real>& x, Real lo, Real hi);

// Reductions.
template <typename Real> Var<Real> sum(const Var<Real>& x);
template <typename Real> Var<Real> mean(const Var<Real>& x);
// Mean over H and W: (N, C, H, W) -> (N, C, 1, 1).
template <typename Real> Var<Real> mean_spatial(const Var<Real>& x);

template <typename Real>
Var<Real> slice_channels(const Var<Real>& x, std::int64_t begin,
                         std::int64_t count);

enum class Padding { kSame, kValid };

// Output geometry of a 2-D cross-correlation along one image.
struct ConvGeometry {
  std::int64_t in_h = 0, in_w = 0;
  std::int64_t out_h = 0, out_w = 0;
  std::int64_t k_h = 0, k_w = 0;
  std::int64_t stride = 1;
  std::int64_t pad_top = 0, pad_left = 0;

  // "Same" padding: out = ceil(in / stride), extra padding at the end.
  static ConvGeometry same(std::int64_t in_h, std::int64_t in_w,
                           std::int64_t k_h, std::int64_t k_w,
                           std::int64_t stride);
  static ConvGeometry valid(std::int64_t in_h, std::int64_t in_w,
                            std::int64_t k_h, std::int64_t k_w,
                            std::int64_t stride);
};

// weight: (C_out, C_in, kh, kw); bias: (1, C_out, 1, 1) or undefined.
template <typename Real>
Var<Real> conv2d(const Var<Real>& x, const Var<Real>& weight,
                 const Var<Real>& bias, int stride,
                 Padding padding = Padding::kSame);

// Adjoint of a same-padded conv2d. weight: (C_in, C_out, kh, kw);
// output spatial dims are (H * stride, W * stride).
template <typename Real>
Var<Real> conv_transpose2d(const Var<Real>& x, const Var<Real>& weight,
                           const Var<Real>& bias, int stride);

// (N, C, H, W) -> (N, C/r^2, H*r, W*r); input channel c lands at
// (c / r^2, h*r + (c / r) % r, w*r + c % r).
template <typename Real>
Var<Real> depth_to_space(const Var<Real>& x, int r);
template <typename Real>
Var<Real> space_to_depth(const Var<Real>& x, int r);

// Per-channel separable filter with "valid" extent: output shrinks by
// taps - 1 in each spatial dimension.
template <typename Real>
Var<Real> separable_filter_valid(const Var<Real>& x,
                                 const std::vector<double>& taps);

// 2x2 average pooling, stride 2. Odd extents are padded by repeating the
// last row/column first.
template <typename Real>
Var<Real> avg_pool2(const Var<Real>& x);

}  // namespace rescomp

#endif  // RESCOMP_OPS_HPP_
