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

#include "rescomp/layers.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

#include "rescomp/optim.hpp"

namespace rescomp {
namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using ColVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <typename Real>
Var<Real> activate(const Var<Real>& x, Activation a, Real slope) {
  return a == Activation::kLeakyRelu ? leaky_relu(x, slope) : x;
}

template <typename Real>
void push(std::vector<NamedParameter<Real>>& out, const std::string& prefix,
          const char* name, const Var<Real>& v) {
  if (v.defined()) out.push_back({prefix + name, v});
}

template <typename Real>
Var<Real> make_weight(Shape shape, std::int64_t fan_in, std::mt19937_64& rng) {
  return Var<Real>::parameter(truncated_normal<Real>(
      shape, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng));
}

template <typename Real>
Var<Real> make_bias(std::int64_t c_out, bool enabled) {
  return enabled ? Var<Real>::parameter(Tensor<Real>(Shape{1, c_out, 1, 1}))
                 : Var<Real>();
}

}  // namespace

template <typename Real>
Var<Real> gdn(const Var<Real>& x, const Var<Real>& beta, const Var<Real>& gamma,
              bool inverse) {
  const Shape xs = x.shape();
  const std::int64_t c = xs.c;
  if (!(beta.shape() == Shape{1, c, 1, 1}) || !(gamma.shape() == Shape{c, c, 1, 1})) {
    throw std::invalid_argument("gdn: input " + xs.to_string() +
                                " does not match beta " + beta.shape().to_string() +
                                " / gamma " + gamma.shape().to_string());
  }
  const std::int64_t p = xs.plane();
  Tensor<Real> out(xs);
  Tensor<Real> denom(xs);  // beta + gamma * x^2, kept for backward
  Eigen::Map<const RowMat<Real>> gm(gamma.value().raw(), c, c);
  Eigen::Map<const ColVec<Real>> bv(beta.value().raw(), c);
  for (std::int64_t n = 0; n < xs.n; ++n) {
    Eigen::Map<const RowMat<Real>> xm(x.value().plane(n, 0), c, p);
    Eigen::Map<RowMat<Real>> dm(denom.plane(n, 0), c, p);
    Eigen::Map<RowMat<Real>> om(out.plane(n, 0), c, p);
    dm.noalias() = gm * xm.cwiseAbs2();
    dm.colwise() += bv;
    if (inverse) {
      om = xm.cwiseProduct(dm.cwiseSqrt());
    } else {
      om = xm.cwiseQuotient(dm.cwiseSqrt());
    }
  }
  return make_op<Real>(
      inverse ? "igdn" : "gdn", std::move(out), {x, beta, gamma},
      [denom = std::move(denom), inverse](Node<Real>& self) {
        Node<Real>& nx = *self.inputs[0];
        Node<Real>& nb = *self.inputs[1];
        Node<Real>& ng = *self.inputs[2];
        const Shape xs = nx.value.shape();
        const std::int64_t c = xs.c;
        const std::int64_t p = xs.plane();
        Eigen::Map<const RowMat<Real>> gm(ng.value.raw(), c, c);
        RowMat<Real> t(c, p);
        for (std::int64_t n = 0; n < xs.n; ++n) {
          Eigen::Map<const RowMat<Real>> xm(nx.value.plane(n, 0), c, p);
          Eigen::Map<const RowMat<Real>> dm(denom.plane(n, 0), c, p);
          Eigen::Map<const RowMat<Real>> go(self.grad.plane(n, 0), c, p);
          // t = g * x * D^{-3/2} (forward) or g * x * D^{-1/2} (inverse);
          // the normalizer derivative enters with sign -1/2 or +1/2.
          Real sign;
          if (inverse) {
            t = go.cwiseProduct(xm).cwiseQuotient(dm.cwiseSqrt());
            sign = Real(0.5);
          } else {
            t = go.cwiseProduct(xm).cwiseQuotient(dm.cwiseProduct(dm.cwiseSqrt()));
            sign = Real(-0.5);
          }
          if (nx.requires_grad) {
            Eigen::Map<RowMat<Real>> gx(nx.grad_buffer().plane(n, 0), c, p);
            if (inverse) {
              gx += go.cwiseProduct(dm.cwiseSqrt());
            } else {
              gx += go.cwiseQuotient(dm.cwiseSqrt());
            }
            gx += (Real(2) * sign) * xm.cwiseProduct(gm.transpose() * t);
          }
          if (nb.requires_grad) {
            Eigen::Map<ColVec<Real>> gb(nb.grad_buffer().raw(), c);
            gb += sign * t.rowwise().sum();
          }
          if (ng.requires_grad) {
            Eigen::Map<RowMat<Real>> gg(ng.grad_buffer().raw(), c, c);
            gg.noalias() += sign * (t * xm.cwiseAbs2().transpose());
          }
        }
      });
}

template <typename Real>
Tensor<Real> gdn_exact_inverse(const Tensor<Real>& y, const Tensor<Real>& beta,
                               const Tensor<Real>& gamma) {
  const Shape s = y.shape();
  const std::int64_t c = s.c;
  if (!(beta.shape() == Shape{1, c, 1, 1}) || !(gamma.shape() == Shape{c, c, 1, 1})) {
    throw std::invalid_argument("gdn_exact_inverse: parameter shapes do not match " +
                                s.to_string());
  }
  using Mat = Eigen::MatrixXd;
  Mat g(c, c);
  for (std::int64_t i = 0; i < c; ++i) {
    for (std::int64_t j = 0; j < c; ++j) g(i, j) = gamma[i * c + j];
  }
  Tensor<Real> x(s);
  Eigen::VectorXd y2(c), rhs(c);
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t h = 0; h < s.h; ++h) {
      for (std::int64_t w = 0; w < s.w; ++w) {
        for (std::int64_t i = 0; i < c; ++i) {
          const double v = y.at(n, i, h, w);
          y2(i) = v * v;
          rhs(i) = y2(i) * beta[i];
        }
        const Mat a = Mat::Identity(c, c) - y2.asDiagonal() * g;
        const Eigen::VectorXd x2 = a.partialPivLu().solve(rhs);
        for (std::int64_t i = 0; i < c; ++i) {
          const double mag = std::sqrt(std::max(x2(i), 0.0));
          x.at(n, i, h, w) = static_cast<Real>(y.at(n, i, h, w) < 0 ? -mag : mag);
        }
      }
    }
  }
  return x;
}

template <typename Real>
std::int64_t Module<Real>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& p : parameters()) total += p.var.value().numel();
  return total;
}

template <typename Real>
Conv2d<Real>::Conv2d(Var<Real> weight, Var<Real> bias, int stride,
                     Activation activation, Real slope)
    : weight_(std::move(weight)),
      bias_(std::move(bias)),
      stride_(stride),
      activation_(activation),
      slope_(slope) {}

template <typename Real>
std::unique_ptr<Conv2d<Real>> Conv2d<Real>::create(
    std::int64_t c_in, std::int64_t c_out, int kernel, int stride, bool bias,
    Activation activation, Real slope, std::mt19937_64& rng) {
  return std::make_unique<Conv2d>(
      make_weight<Real>(Shape{c_out, c_in, kernel, kernel},
                        c_in * kernel * kernel, rng),
      make_bias<Real>(c_out, bias), stride, activation, slope);
}

template <typename Real>
Var<Real> Conv2d<Real>::forward(const Var<Real>& x) const {
  return activate(conv2d(x, weight_, bias_, stride_), activation_, slope_);
}

template <typename Real>
void Conv2d<Real>::collect_parameters(const std::string& prefix,
                                      std::vector<NamedParameter<Real>>& out) const {
  push(out, prefix, "weight", weight_);
  push(out, prefix, "bias", bias_);
}

template <typename Real>
ConvTranspose2d<Real>::ConvTranspose2d(Var<Real> weight, Var<Real> bias,
                                       int stride, Activation activation,
                                       Real slope)
    : weight_(std::move(weight)),
      bias_(std::move(bias)),
      stride_(stride),
      activation_(activation),
      slope_(slope) {}

template <typename Real>
std::unique_ptr<ConvTranspose2d<Real>> ConvTranspose2d<Real>::create(
    std::int64_t c_in, std::int64_t c_out, int kernel, int stride, bool bias,
    Activation activation, Real slope, std::mt19937_64& rng) {
  // Each output pixel sees about (kernel/stride)^2 taps per input channel.
  const std::int64_t fan_in =
      std::max<std::int64_t>(c_in * kernel * kernel / (stride * stride), 1);
  return std::make_unique<ConvTranspose2d>(
      make_weight<Real>(Shape{c_in, c_out, kernel, kernel}, fan_in, rng),
      make_bias<Real>(c_out, bias), stride, activation, slope);
}

template <typename Real>
Var<Real> ConvTranspose2d<Real>::forward(const Var<Real>& x) const {
  return activate(conv_transpose2d(x, weight_, bias_, stride_), activation_, slope_);
}

template <typename Real>
void ConvTranspose2d<Real>::collect_parameters(
    const std::string& prefix, std::vector<NamedParameter<Real>>& out) const {
  push(out, prefix, "weight", weight_);
  push(out, prefix, "bias", bias_);
}

template <typename Real>
Var<Real> subpixel_upsample(const Var<Real>& x, const Var<Real>& weight,
                            const Var<Real>& bias, int r) {
  const std::int64_t blocks = static_cast<std::int64_t>(r) * r;
  if (r <= 0 || weight.shape().n % blocks != 0) {
    throw std::invalid_argument(
        "subpixel_upsample: conv output channels " +
        std::to_string(weight.shape().n) + " not divisible by " +
        std::to_string(blocks));
  }
  return depth_to_space(conv2d(x, weight, bias, 1), r);
}

template <typename Real>
SubpixelConv<Real>::SubpixelConv(Var<Real> weight, Var<Real> bias, int r,
                                 Activation activation, Real slope)
    : weight_(std::move(weight)),
      bias_(std::move(bias)),
      r_(r),
      activation_(activation),
      slope_(slope) {
  if (r <= 0 || weight_.shape().n % (static_cast<std::int64_t>(r) * r) != 0) {
    throw std::invalid_argument("SubpixelConv: " + std::to_string(weight_.shape().n) +
                                " conv channels not divisible by r^2");
  }
}

template <typename Real>
std::unique_ptr<SubpixelConv<Real>> SubpixelConv<Real>::create(
    std::int64_t c_in, std::int64_t c_out, int kernel, int r, bool bias,
    Activation activation, Real slope, std::mt19937_64& rng) {
  const std::int64_t conv_out = c_out * r * r;
  return std::make_unique<SubpixelConv>(
      make_weight<Real>(Shape{conv_out, c_in, kernel, kernel},
                        c_in * kernel * kernel, rng),
      make_bias<Real>(conv_out, bias), r, activation, slope);
}

template <typename Real>
Var<Real> SubpixelConv<Real>::forward(const Var<Real>& x) const {
  return activate(subpixel_upsample(x, weight_, bias_, r_), activation_, slope_);
}

template <typename Real>
void SubpixelConv<Real>::collect_parameters(
    const std::string& prefix, std::vector<NamedParameter<Real>>& out) const {
  push(out, prefix, "weight", weight_);
  push(out, prefix, "bias", bias_);
}

template <typename Real>
Gdn<Real>::Gdn(std::int64_t channels, bool inverse) : inverse_(inverse) {
  Tensor<Real> beta(Shape{1, channels, 1, 1},
                    static_cast<Real>(std::sqrt(1.0 - kGdnBetaFloor)));
  // gamma = 0.1 I; off-diagonal raw values start slightly above zero so that
  // the squared parameterization still passes gradient to them.
  Tensor<Real> gamma(Shape{channels, channels, 1, 1}, Real(1e-3));
  for (std::int64_t i = 0; i < channels; ++i) {
    gamma[i * channels + i] = static_cast<Real>(std::sqrt(0.1));
  }
  beta_raw_ = Var<Real>::parameter(std::move(beta));
  gamma_raw_ = Var<Real>::parameter(std::move(gamma));
}

template <typename Real>
Var<Real> Gdn<Real>::beta() const {
  return add_scalar(square(beta_raw_), static_cast<Real>(kGdnBetaFloor));
}

template <typename Real>
Var<Real> Gdn<Real>::gamma() const {
  return square(gamma_raw_);
}

template <typename Real>
Var<Real> Gdn<Real>::forward(const Var<Real>& x) const {
  return gdn(x, beta(), gamma(), inverse_);
}

template <typename Real>
void Gdn<Real>::collect_parameters(const std::string& prefix,
                                   std::vector<NamedParameter<Real>>& out) const {
  push(out, prefix, "beta", beta_raw_);
  push(out, prefix, "gamma", gamma_raw_);
}

template <typename Real>
ResidualUnit<Real>::ResidualUnit(std::unique_ptr<Module<Real>> conv_a,
                                 std::unique_ptr<Module<Real>> norm,
                                 std::unique_ptr<Module<Real>> conv_b,
                                 std::unique_ptr<Module<Real>> shortcut,
                                 Real slope)
    : conv_a_(std::move(conv_a)),
      norm_(std::move(norm)),
      conv_b_(std::move(conv_b)),
      shortcut_(std::move(shortcut)),
      slope_(slope) {
  if (!conv_a_) throw std::invalid_argument("ResidualUnit needs a first conv");
}

template <typename Real>
Var<Real> ResidualUnit<Real>::forward(const Var<Real>& x) const {
  Var<Real> h = conv_a_->forward(x);
  h = norm_ ? norm_->forward(h) : leaky_relu(h, slope_);
  if (conv_b_) h = leaky_relu(conv_b_->forward(h), slope_);
  const Var<Real> s = shortcut_ ? shortcut_->forward(x) : x;
  if (!(s.shape() == h.shape())) {
    throw std::invalid_argument("ResidualUnit: shortcut " + s.shape().to_string() +
                                " does not match branch " + h.shape().to_string());
  }
  return add(h, s);
}

template <typename Real>
void ResidualUnit<Real>::collect_parameters(
    const std::string& prefix, std::vector<NamedParameter<Real>>& out) const {
  conv_a_->collect_parameters(prefix + "conv_a.", out);
  if (norm_) norm_->collect_parameters(prefix + "norm.", out);
  if (conv_b_) conv_b_->collect_parameters(prefix + "conv_b.", out);
  if (shortcut_) shortcut_->collect_parameters(prefix + "shortcut.", out);
}

template <typename Real>
void Sequential<Real>::add(std::string name, std::unique_ptr<Module<Real>> module) {
  names_.push_back(std::move(name));
  modules_.push_back(std::move(module));
}

template <typename Real>
Var<Real> Sequential<Real>::forward(const Var<Real>& x) const {
  Var<Real> h = x;
  for (const auto& m : modules_) h = m->forward(h);
  return h;
}

template <typename Real>
void Sequential<Real>::collect_parameters(
    const std::string& prefix, std::vector<NamedParameter<Real>>& out) const {
  for (std::size_t i = 0; i < modules_.size(); ++i) {
    modules_[i]->collect_parameters(prefix + names_[i] + ".", out);
  }
}

int receptive_field(std::span<const KernelStride> stack) {
  if (stack.empty()) throw std::invalid_argument("receptive_field: empty stack");
  int field = 1;
  int jump = 1;
  for (const auto& layer : stack) {
    field += (layer.kernel - 1) * jump;
    jump *= layer.stride;
  }
  return field;
}

#define RESCOMP_INSTANTIATE_LAYERS(Real)                                      \
  template Var<Real> gdn(const Var<Real>&, const Var<Real>&, const Var<Real>&, \
                         bool);                                               \
  template Tensor<Real> gdn_exact_inverse(const Tensor<Real>&,                \
                                          const Tensor<Real>&,                \
                                          const Tensor<Real>&);               \
  template Var<Real> subpixel_upsample(const Var<Real>&, const Var<Real>&,    \
                                       const Var<Real>&, int);                \
  template class Module<Real>;                                                \
  template class Conv2d<Real>;                                                \
  template class ConvTranspose2d<Real>;                                       \
  template class SubpixelConv<Real>;                                          \
  template class Gdn<Real>;                                                   \
  template class ResidualUnit<Real>;                                          \
  template class Sequential<Real>;

RESCOMP_INSTANTIATE_LAYERS(float)
RESCOMP_INSTANTIATE_LAYERS(double)

}  // namespace rescomp
