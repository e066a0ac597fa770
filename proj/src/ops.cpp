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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rescomp/ops.hpp"

namespace rescomp {
namespace {

template <typename Real, typename Fwd, typename Deriv>
Var<Real> unary(const char* name, const Var<Real>& x, Fwd fwd, Deriv deriv) {
  const Tensor<Real>& xv = x.value();
  Tensor<Real> out(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) out[i] = fwd(xv[i]);
  return make_op<Real>(name, std::move(out), {x}, [deriv](Node<Real>& self) {
    Node<Real>& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor<Real>& g = in.grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      g[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
    }
  });
}

template <typename Real>
void accumulate(Node<Real>& in, const Tensor<Real>& g, Real factor = 1) {
  if (!in.requires_grad) return;
  Tensor<Real>& dst = in.grad_buffer();
  for (std::int64_t i = 0; i < g.numel(); ++i) dst[i] += factor * g[i];
}

}  // namespace

template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<Real> out(a.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = a.value()[i] + b.value()[i];
  }
  return make_op<Real>("add", std::move(out), {a, b}, [](Node<Real>& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], self.grad);
  });
}

template <typename Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<Real> out(a.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = a.value()[i] - b.value()[i];
  }
  return make_op<Real>("sub", std::move(out), {a, b}, [](Node<Real>& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], self.grad, Real(-1));
  });
}

template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<Real> out(a.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = a.value()[i] * b.value()[i];
  }
  return make_op<Real>("mul", std::move(out), {a, b}, [](Node<Real>& self) {
    Node<Real>& na = *self.inputs[0];
    Node<Real>& nb = *self.inputs[1];
    if (na.requires_grad) {
      Tensor<Real>& g = na.grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        g[i] += self.grad[i] * nb.value[i];
      }
    }
    if (nb.requires_grad) {
      Tensor<Real>& g = nb.grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        g[i] += self.grad[i] * na.value[i];
      }
    }
  });
}

template <typename Real>
Var<Real> div(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "div");
  Tensor<Real> out(a.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = a.value()[i] / b.value()[i];
  }
  return make_op<Real>("div", std::move(out), {a, b}, [](Node<Real>& self) {
    Node<Real>& na = *self.inputs[0];
    Node<Real>& nb = *self.inputs[1];
    if (na.requires_grad) {
      Tensor<Real>& g = na.grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        g[i] += self.grad[i] / nb.value[i];
      }
    }
    if (nb.requires_grad) {
      Tensor<Real>& g = nb.grad_buffer();
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        g[i] -= self.grad[i] * self.value[i] / nb.value[i];
      }
    }
  });
}

template <typename Real>
Var<Real> scale(const Var<Real>& x, Real s) {
  return unary<Real>(
      "scale", x, [s](Real v) { return s * v; },
      [s](Real, Real) { return s; });
}

template <typename Real>
Var<Real> add_scalar(const Var<Real>& x, Real s) {
  return unary<Real>(
      "add_scalar", x, [s](Real v) { return v + s; },
      [](Real, Real) { return Real(1); });
}

template <typename Real>
Var<Real> square(const Var<Real>& x) {
  return unary<Real>(
      "square", x, [](Real v) { return v * v; },
      [](Real v, Real) { return Real(2) * v; });
}

template <typename Real>
Var<Real> sqrt(const Var<Real>& x) {
  return unary<Real>(
      "sqrt", x, [](Real v) { return std::sqrt(v); },
      [](Real, Real y) { return Real(0.5) / y; });
}

template <typename Real>
Var<Real> exp(const Var<Real>& x) {
  return unary<Real>(
      "exp", x, [](Real v) { return std::exp(v); },
      [](Real, Real y) { return y; });
}

template <typename Real>
Var<Real> log(const Var<Real>& x) {
  return unary<Real>(
      "log", x, [](Real v) { return std::log(v); },
      [](Real v, Real) { return Real(1) / v; });
}

template <typename Real>
Var<Real> relu(const Var<Real>& x) {
  return unary<Real>(
      "relu", x, [](Real v) { return v > 0 ? v : Real(0); },
      [](Real v, Real) { return v > 0 ? Real(1) : Real(0); });
}

template <typename Real>
Var<Real> pow_scalar(const Var<Real>& x, Real p) {
  return unary<Real>(
      "pow", x, [p](Real v) { return std::pow(v, p); },
      [p](Real v, Real) { return v == Real(0) ? Real(0) : p * std::pow(v, p - 1); });
}

template <typename Real>
Var<Real> leaky_relu(const Var<Real>& x, Real slope) {
  return unary<Real>(
      "leaky_relu", x, [slope](Real v) { return v >= 0 ? v : slope * v; },
      [slope](Real v, Real) { return v >= 0 ? Real(1) : slope; });
}

template <typename Real>
Var<Real> clamp(const Var<Real>& x, Real lo, Real hi) {
  return unary<Real>(
      "clamp", x, [lo, hi](Real v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](Real v, Real) { return (v > lo && v < hi) ? Real(1) : Real(0); });
}

template <typename Real>
Var<Real> sum(const Var<Real>& x) {
  double acc = 0;
  for (Real v : x.value().data()) acc += v;
  return make_op<Real>("sum", Tensor<Real>::scalar(static_cast<Real>(acc)),
                       {x}, [](Node<Real>& self) {
                         Node<Real>& in = *self.inputs[0];
                         if (!in.requires_grad) return;
                         Tensor<Real>& g = in.grad_buffer();
                         const Real s = self.grad[0];
                         for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s;
                       });
}

template <typename Real>
Var<Real> mean(const Var<Real>& x) {
  const auto n = static_cast<Real>(x.value().numel());
  return scale(sum(x), Real(1) / n);
}

template <typename Real>
Var<Real> mean_spatial(const Var<Real>& x) {
  const Shape s = x.shape();
  Tensor<Real> out(Shape{s.n, s.c, 1, 1});
  const std::int64_t plane = s.plane();
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    double acc = 0;
    const Real* p = x.value().raw() + nc * plane;
    for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
    out[nc] = static_cast<Real>(acc / static_cast<double>(plane));
  }
  return make_op<Real>("mean_spatial", std::move(out), {x},
                       [plane](Node<Real>& self) {
                         Node<Real>& in = *self.inputs[0];
                         if (!in.requires_grad) return;
                         Tensor<Real>& g = in.grad_buffer();
                         const Real inv = Real(1) / static_cast<Real>(plane);
                         for (std::int64_t nc = 0; nc < self.grad.numel(); ++nc) {
                           const Real d = self.grad[nc] * inv;
                           Real* dst = g.raw() + nc * plane;
                           for (std::int64_t i = 0; i < plane; ++i) dst[i] += d;
                         }
                       });
}

template <typename Real>
Var<Real> slice_channels(const Var<Real>& x, std::int64_t begin,
                         std::int64_t count) {
  const Shape s = x.shape();
  if (begin < 0 || count < 0 || begin + count > s.c) {
    throw std::invalid_argument("slice_channels: range [" +
                                std::to_string(begin) + ", " +
                                std::to_string(begin + count) +
                                ") outside " + s.to_string());
  }
  Tensor<Real> out(Shape{s.n, count, s.h, s.w});
  const std::int64_t plane = s.plane();
  for (std::int64_t n = 0; n < s.n; ++n) {
    const Real* src = x.value().plane(n, begin);
    std::copy(src, src + count * plane, out.plane(n, 0));
  }
  return make_op<Real>(
      "slice_channels", std::move(out), {x}, [begin, count](Node<Real>& self) {
        Node<Real>& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor<Real>& g = in.grad_buffer();
        const Shape s = g.shape();
        const std::int64_t len = count * s.plane();
        for (std::int64_t n = 0; n < s.n; ++n) {
          Real* dst = g.plane(n, begin);
          const Real* src = self.grad.plane(n, 0);
          for (std::int64_t i = 0; i < len; ++i) dst[i] += src[i];
        }
      });
}

namespace {

// Maps between the depth layout (N, C, H, W) and the space layout
// (N, C/r^2, H*r, W*r). When to_space is set, src is in depth layout.
template <typename Real>
void shuffle(const Tensor<Real>& src, Tensor<Real>& dst, int r, bool to_space,
             bool accumulate_into) {
  const Shape depth = to_space ? src.shape() : dst.shape();
  const std::int64_t oc_count = depth.c / (r * r);
  for (std::int64_t n = 0; n < depth.n; ++n) {
    for (std::int64_t c = 0; c < depth.c; ++c) {
      const std::int64_t oc = c / (r * r);
      const std::int64_t dy = (c / r) % r;
      const std::int64_t dx = c % r;
      for (std::int64_t h = 0; h < depth.h; ++h) {
        for (std::int64_t w = 0; w < depth.w; ++w) {
          const std::int64_t d_idx = ((n * depth.c + c) * depth.h + h) * depth.w + w;
          const std::int64_t s_idx =
              ((n * oc_count + oc) * depth.h * r + h * r + dy) * depth.w * r +
              w * r + dx;
          if (to_space) {
            if (accumulate_into) dst[s_idx] += src[d_idx]; else dst[s_idx] = src[d_idx];
          } else {
            if (accumulate_into) dst[d_idx] += src[s_idx]; else dst[d_idx] = src[s_idx];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename Real>
Var<Real> depth_to_space(const Var<Real>& x, int r) {
  const Shape s = x.shape();
  if (r <= 0) throw std::invalid_argument("depth_to_space: block size must be positive");
  if (s.c % (static_cast<std::int64_t>(r) * r) != 0) {
    throw std::invalid_argument("depth_to_space: channels " +
                                std::to_string(s.c) + " not divisible by " +
                                std::to_string(r * r) + " in " + s.to_string());
  }
  Tensor<Real> out(Shape{s.n, s.c / (r * r), s.h * r, s.w * r});
  shuffle(x.value(), out, r, /*to_space=*/true, false);
  return make_op<Real>("depth_to_space", std::move(out), {x},
                       [r](Node<Real>& self) {
                         Node<Real>& in = *self.inputs[0];
                         if (!in.requires_grad) return;
                         shuffle(self.grad, in.grad_buffer(), r, false, true);
                       });
}

template <typename Real>
Var<Real> space_to_depth(const Var<Real>& x, int r) {
  const Shape s = x.shape();
  if (r <= 0 || s.h % r != 0 || s.w % r != 0) {
    throw std::invalid_argument("space_to_depth: spatial dims of " +
                                s.to_string() + " not divisible by " +
                                std::to_string(r));
  }
  Tensor<Real> out(Shape{s.n, s.c * r * r, s.h / r, s.w / r});
  shuffle(x.value(), out, r, /*to_space=*/false, false);
  return make_op<Real>("space_to_depth", std::move(out), {x},
                       [r](Node<Real>& self) {
                         Node<Real>& in = *self.inputs[0];
                         if (!in.requires_grad) return;
                         shuffle(self.grad, in.grad_buffer(), r, true, true);
                       });
}

template <typename Real>
Var<Real> separable_filter_valid(const Var<Real>& x,
                                 const std::vector<double>& taps) {
  const Shape s = x.shape();
  const auto k = static_cast<std::int64_t>(taps.size());
  if (k == 0 || s.h < k || s.w < k) {
    throw std::invalid_argument("separable_filter_valid: " +
                                std::to_string(k) + "-tap filter on " +
                                s.to_string());
  }
  const std::int64_t oh = s.h - k + 1;
  const std::int64_t ow = s.w - k + 1;
  Tensor<Real> out(Shape{s.n, s.c, oh, ow});
  std::vector<double> tmp(static_cast<std::size_t>(s.h * ow));
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const Real* src = x.value().raw() + nc * s.plane();
    for (std::int64_t h = 0; h < s.h; ++h) {
      for (std::int64_t w = 0; w < ow; ++w) {
        double acc = 0;
        for (std::int64_t t = 0; t < k; ++t) acc += taps[t] * src[h * s.w + w + t];
        tmp[h * ow + w] = acc;
      }
    }
    Real* dst = out.raw() + nc * oh * ow;
    for (std::int64_t h = 0; h < oh; ++h) {
      for (std::int64_t w = 0; w < ow; ++w) {
        double acc = 0;
        for (std::int64_t t = 0; t < k; ++t) acc += taps[t] * tmp[(h + t) * ow + w];
        dst[h * ow + w] = static_cast<Real>(acc);
      }
    }
  }
  return make_op<Real>(
      "separable_filter_valid", std::move(out), {x}, [taps](Node<Real>& self) {
        Node<Real>& in = *self.inputs[0];
        if (!in.requires_grad) return;
        const Shape s = in.value.shape();
        const auto k = static_cast<std::int64_t>(taps.size());
        const std::int64_t oh = s.h - k + 1;
        const std::int64_t ow = s.w - k + 1;
        Tensor<Real>& g = in.grad_buffer();
        std::vector<double> tmp(static_cast<std::size_t>(s.h * ow));
        for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
          const Real* gout = self.grad.raw() + nc * oh * ow;
          std::fill(tmp.begin(), tmp.end(), 0.0);
          for (std::int64_t h = 0; h < oh; ++h) {
            for (std::int64_t w = 0; w < ow; ++w) {
              const double v = gout[h * ow + w];
              for (std::int64_t t = 0; t < k; ++t) tmp[(h + t) * ow + w] += taps[t] * v;
            }
          }
          Real* gin = g.raw() + nc * s.plane();
          for (std::int64_t h = 0; h < s.h; ++h) {
            for (std::int64_t w = 0; w < ow; ++w) {
              const double v = tmp[h * ow + w];
              for (std::int64_t t = 0; t < k; ++t) {
                gin[h * s.w + w + t] += static_cast<Real>(taps[t] * v);
              }
            }
          }
        }
      });
}

template <typename Real>
Var<Real> avg_pool2(const Var<Real>& x) {
  const Shape s = x.shape();
  const std::int64_t oh = (s.h + 1) / 2;
  const std::int64_t ow = (s.w + 1) / 2;
  Tensor<Real> out(Shape{s.n, s.c, oh, ow});
  auto src_row = [&](std::int64_t r) { return r < s.h ? r : s.h - 1; };
  auto src_col = [&](std::int64_t c) { return c < s.w ? c : s.w - 1; };
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const Real* src = x.value().raw() + nc * s.plane();
    Real* dst = out.raw() + nc * oh * ow;
    for (std::int64_t h = 0; h < oh; ++h) {
      for (std::int64_t w = 0; w < ow; ++w) {
        Real acc = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            acc += src[src_row(2 * h + dy) * s.w + src_col(2 * w + dx)];
          }
        }
        dst[h * ow + w] = acc * Real(0.25);
      }
    }
  }
  return make_op<Real>("avg_pool2", std::move(out), {x}, [](Node<Real>& self) {
    Node<Real>& in = *self.inputs[0];
    if (!in.requires_grad) return;
    const Shape s = in.value.shape();
    const Shape o = self.value.shape();
    Tensor<Real>& g = in.grad_buffer();
    for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
      const Real* gout = self.grad.raw() + nc * o.plane();
      Real* gin = g.raw() + nc * s.plane();
      for (std::int64_t h = 0; h < o.h; ++h) {
        for (std::int64_t w = 0; w < o.w; ++w) {
          const Real v = gout[h * o.w + w] * Real(0.25);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::int64_t r = std::min(2 * h + dy, s.h - 1);
              const std::int64_t c = std::min(2 * w + dx, s.w - 1);
              gin[r * s.w + c] += v;
            }
          }
        }
      }
    }
  });
}

#define RESCOMP_INSTANTIATE_OPS(Real)                                        \
  template Var<Real> add(const Var<Real>&, const Var<Real>&);                \
  template Var<Real> sub(const Var<Real>&, const Var<Real>&);                \
  template Var<Real> mul(const Var<Real>&, const Var<Real>&);                \
  template Var<Real> div(const Var<Real>&, const Var<Real>&);                \
  template Var<Real> scale(const Var<Real>&, Real);                          \
  template Var<Real> add_scalar(const Var<Real>&, Real);                     \
  template Var<Real> square(const Var<Real>&);                               \
  template Var<Real> sqrt(const Var<Real>&);                                 \
  template Var<Real> exp(const Var<Real>&);                                  \
  template Var<Real> log(const Var<Real>&);                                  \
  template Var<Real> relu(const Var<Real>&);                                 \
  template Var<Real> pow_scalar(const Var<Real>&, Real);                     \
  template Var<Real> leaky_relu(const Var<Real>&, Real);                     \
  template Var<Real> clamp(const Var<Real>&, Real, Real);                    \
  template Var<Real> sum(const Var<Real>&);                                  \
  template Var<Real> mean(const Var<Real>&);                                 \
  template Var<Real> mean_spatial(const Var<Real>&);                         \
  template Var<Real> slice_channels(const Var<Real>&, std::int64_t,          \
                                    std::int64_t);                           \
  template Var<Real> depth_to_space(const Var<Real>&, int);                  \
  template Var<Real> space_to_depth(const Var<Real>&, int);                  \
  template Var<Real> separable_filter_valid(const Var<Real>&,                \
                                            const std::vector<double>&);     \
  template Var<Real> avg_pool2(const Var<Real>&);

RESCOMP_INSTANTIATE_OPS(float)
RESCOMP_INSTANTIATE_OPS(double)

}  // namespace rescomp
