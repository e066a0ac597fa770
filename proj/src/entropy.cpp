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

#include "rescomp/entropy.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rescomp {
namespace {

constexpr int kPriorLayers = 4;
constexpr std::array<int, kPriorLayers + 1> kWidths = {1, 3, 3, 3, 1};
constexpr double kPriorInitScale = 10.0;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Unit-bin mass around the mean; the |v| form evaluates both CDF terms in
// the lower tail where erfc is accurate.
double bin_mass(double v, double sigma) {
  const double a = (0.5 - std::abs(v)) / sigma;
  const double b = (-0.5 - std::abs(v)) / sigma;
  return normal_cdf(a) - normal_cdf(b);
}

double sigmoid_diff_value(double lower, double upper) {
  const double s = lower + upper > 0.0 ? -1.0 : 1.0;
  return std::abs(logistic(s * upper) - logistic(s * lower));
}

// Transformed parameters of one channel of the factorized prior.
struct ChannelDensity {
  std::array<std::array<double, 9>, kPriorLayers> matrix{};   // softplus(raw)
  std::array<std::array<double, 9>, kPriorLayers> dmatrix{};  // logistic(raw)
  std::array<std::array<double, 3>, kPriorLayers> bias{};
  std::array<std::array<double, 3>, kPriorLayers - 1> gate{};   // tanh(raw)
  std::array<std::array<double, 3>, kPriorLayers - 1> dgate{};  // 1 - tanh^2

  template <typename Real>
  void load(const std::vector<const Tensor<Real>*>& p, std::int64_t c) {
    for (int i = 0; i < kPriorLayers; ++i) {
      const int n = kWidths[i] * kWidths[i + 1];
      for (int j = 0; j < n; ++j) {
        const double raw = (*p[i])[c * n + j];
        matrix[i][j] = softplus(raw);
        dmatrix[i][j] = logistic(raw);
      }
      for (int o = 0; o < kWidths[i + 1]; ++o) {
        bias[i][o] = (*p[kPriorLayers + i])[c * kWidths[i + 1] + o];
      }
    }
    for (int i = 0; i < kPriorLayers - 1; ++i) {
      for (int o = 0; o < 3; ++o) {
        gate[i][o] = std::tanh(static_cast<double>((*p[2 * kPriorLayers + i])[c * 3 + o]));
        dgate[i][o] = 1.0 - gate[i][o] * gate[i][o];
      }
    }
  }
};

// Activations of one evaluation, kept for the reverse pass.
struct DensityTrace {
  std::array<std::array<double, 3>, kPriorLayers + 1> h{};  // layer inputs
  std::array<std::array<double, 3>, kPriorLayers> pre{};
};

double density_logit(const ChannelDensity& d, double x, DensityTrace& t) {
  t.h[0][0] = x;
  for (int i = 0; i < kPriorLayers; ++i) {
    const int in = kWidths[i], out = kWidths[i + 1];
    for (int o = 0; o < out; ++o) {
      double acc = d.bias[i][o];
      for (int j = 0; j < in; ++j) acc += d.matrix[i][o * in + j] * t.h[i][j];
      t.pre[i][o] = acc;
      t.h[i + 1][o] = i < kPriorLayers - 1 ? acc + d.gate[i][o] * std::tanh(acc) : acc;
    }
  }
  return t.h[kPriorLayers][0];
}

struct DensityGrad {
  std::array<std::array<double, 9>, kPriorLayers> matrix{};
  std::array<std::array<double, 3>, kPriorLayers> bias{};
  std::array<std::array<double, 3>, kPriorLayers - 1> gate{};
};

// Returns d logit / d x and accumulates parameter gradients scaled by g.
double density_backward(const ChannelDensity& d, const DensityTrace& t, double g,
                        DensityGrad& grad) {
  std::array<double, 3> gh{g, 0.0, 0.0};
  for (int i = kPriorLayers - 1; i >= 0; --i) {
    const int in = kWidths[i], out = kWidths[i + 1];
    std::array<double, 3> gpre{};
    for (int o = 0; o < out; ++o) {
      if (i < kPriorLayers - 1) {
        const double th = std::tanh(t.pre[i][o]);
        gpre[o] = gh[o] * (1.0 + d.gate[i][o] * (1.0 - th * th));
        grad.gate[i][o] += gh[o] * th * d.dgate[i][o];
      } else {
        gpre[o] = gh[o];
      }
      grad.bias[i][o] += gpre[o];
    }
    std::array<double, 3> gin{};
    for (int o = 0; o < out; ++o) {
      for (int j = 0; j < in; ++j) {
        grad.matrix[i][o * in + j] += gpre[o] * t.h[i][j] * d.dmatrix[i][o * in + j];
        gin[j] += d.matrix[i][o * in + j] * gpre[o];
      }
    }
    gh = gin;
  }
  return gh[0];
}

template <typename Real>
std::vector<const Tensor<Real>*> param_values(const std::vector<Var<Real>>& params) {
  std::vector<const Tensor<Real>*> out;
  for (const auto& p : params) out.push_back(&p.value());
  return out;
}

// CDF logits of the per-channel density; inputs are x followed by the
// matrices, biases and gates.
template <typename Real>
Var<Real> density_logits_op(const Var<Real>& x, const std::vector<Var<Real>>& params) {
  const Shape s = x.shape();
  Tensor<Real> out(s);
  const auto values = param_values(params);
  DensityTrace trace;
  for (std::int64_t c = 0; c < s.c; ++c) {
    ChannelDensity d;
    d.load(values, c);
    for (std::int64_t n = 0; n < s.n; ++n) {
      const Real* xp = x.value().plane(n, c);
      Real* op = out.plane(n, c);
      for (std::int64_t i = 0; i < s.plane(); ++i) {
        op[i] = static_cast<Real>(density_logit(d, xp[i], trace));
      }
    }
  }
  std::vector<Var<Real>> inputs{x};
  inputs.insert(inputs.end(), params.begin(), params.end());
  return make_op<Real>("density_logits", std::move(out), std::move(inputs), [](Node<Real>& self) {
    Node<Real>& nx = *self.inputs[0];
    const Shape s = nx.value.shape();
    std::vector<const Tensor<Real>*> values;
    bool params_need_grad = false;
    for (std::size_t i = 1; i < self.inputs.size(); ++i) {
      values.push_back(&self.inputs[i]->value);
      params_need_grad = params_need_grad || self.inputs[i]->requires_grad;
    }
    DensityTrace trace;
    for (std::int64_t c = 0; c < s.c; ++c) {
      ChannelDensity d;
      d.load(values, c);
      DensityGrad grad;
      for (std::int64_t n = 0; n < s.n; ++n) {
        const Real* xp = nx.value.plane(n, c);
        const Real* gp = self.grad.plane(n, c);
        Real* gx = nx.requires_grad ? nx.grad_buffer().plane(n, c) : nullptr;
        for (std::int64_t i = 0; i < s.plane(); ++i) {
          if (gp[i] == Real(0)) continue;
          density_logit(d, xp[i], trace);
          const double dx = density_backward(d, trace, gp[i], grad);
          if (gx) gx[i] += static_cast<Real>(dx);
        }
      }
      if (!params_need_grad) continue;
      for (int i = 0; i < kPriorLayers; ++i) {
        Node<Real>& nm = *self.inputs[1 + i];
        Node<Real>& nb = *self.inputs[1 + kPriorLayers + i];
        const int in = kWidths[i], out = kWidths[i + 1];
        if (nm.requires_grad) {
          for (int j = 0; j < in * out; ++j) {
            nm.grad_buffer()[c * in * out + j] += static_cast<Real>(grad.matrix[i][j]);
          }
        }
        if (nb.requires_grad) {
          for (int o = 0; o < out; ++o) {
            nb.grad_buffer()[c * out + o] += static_cast<Real>(grad.bias[i][o]);
          }
        }
      }
      for (int i = 0; i < kPriorLayers - 1; ++i) {
        Node<Real>& nf = *self.inputs[1 + 2 * kPriorLayers + i];
        if (!nf.requires_grad) continue;
        for (int o = 0; o < 3; ++o) {
          nf.grad_buffer()[c * 3 + o] += static_cast<Real>(grad.gate[i][o]);
        }
      }
    }
  });
}

}  // namespace

template <typename Real>
Var<Real> quantize(const Var<Real>& x, QuantMode mode, std::mt19937_64& rng) {
  Tensor<Real> out = x.value();
  if (mode == QuantMode::kEval) {
    for (Real& v : out.data()) v = std::nearbyint(v);
    return constant(std::move(out));
  }
  std::uniform_real_distribution<double> noise(-0.5, 0.5);
  for (Real& v : out.data()) {
    Real u = static_cast<Real>(noise(rng));
    if (u >= Real(0.5)) u = std::nextafter(Real(0.5), Real(0));
    v += u;
  }
  return make_op<Real>("quantize_noise", std::move(out), {x}, [](Node<Real>& self) {
    Node<Real>& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor<Real>& g = in.grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

template <typename Real>
Tensor<Real> quantize_around(const Tensor<Real>& x, const Tensor<Real>& offset) {
  const Shape s = x.shape();
  if (!(offset.shape() == Shape{1, s.c, 1, 1})) {
    throw std::invalid_argument("quantize_around: offset " + offset.shape().to_string() +
                                " does not match " + s.to_string());
  }
  Tensor<Real> out(s);
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const Real m = offset[c];
      const Real* xp = x.plane(n, c);
      Real* op = out.plane(n, c);
      for (std::int64_t i = 0; i < s.plane(); ++i) op[i] = std::nearbyint(xp[i] - m) + m;
    }
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gaussian_pmf(std::int64_t k, double mu, double sigma, double floor) {
  return std::max(bin_mass(static_cast<double>(k) - mu, sigma), floor);
}

template <typename Real>
Var<Real> gaussian_likelihood(const Var<Real>& y, const Var<Real>& mu,
                              const Var<Real>& sigma) {
  require_same_shape(y.shape(), mu.shape(), "gaussian_likelihood(y, mu)");
  require_same_shape(y.shape(), sigma.shape(), "gaussian_likelihood(y, sigma)");
  Tensor<Real> out(y.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = static_cast<Real>(bin_mass(static_cast<double>(y.value()[i]) - mu.value()[i],
                                        sigma.value()[i]));
  }
  return make_op<Real>("gaussian_likelihood", std::move(out), {y, mu, sigma},
                       [](Node<Real>& self) {
    Node<Real>& ny = *self.inputs[0];
    Node<Real>& nm = *self.inputs[1];
    Node<Real>& ns = *self.inputs[2];
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
      const double g = self.grad[i];
      if (g == 0.0) continue;
      const double v = static_cast<double>(ny.value[i]) - nm.value[i];
      const double sigma = ns.value[i];
      const double a = (0.5 - std::abs(v)) / sigma;
      const double b = (-0.5 - std::abs(v)) / sigma;
      const double pa = normal_pdf(a), pb = normal_pdf(b);
      const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      const double dv = sign * (pb - pa) / sigma;
      if (ny.requires_grad) ny.grad_buffer()[i] += static_cast<Real>(g * dv);
      if (nm.requires_grad) nm.grad_buffer()[i] -= static_cast<Real>(g * dv);
      if (ns.requires_grad) {
        ns.grad_buffer()[i] += static_cast<Real>(-g * (a * pa - b * pb) / sigma);
      }
    }
  });
}

template <typename Real>
Var<Real> lower_bound(const Var<Real>& p, Real bound) {
  Tensor<Real> out = p.value();
  for (Real& v : out.data()) v = std::max(v, bound);
  return make_op<Real>("lower_bound", std::move(out), {p}, [bound](Node<Real>& self) {
    Node<Real>& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor<Real>& g = in.grad_buffer();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      if (in.value[i] > bound) g[i] += self.grad[i];
    }
  });
}

template <typename Real>
Var<Real> total_bits(const Var<Real>& likelihoods) {
  return scale(sum(log(likelihoods)), static_cast<Real>(-1.0 / std::numbers::ln2));
}

template <typename Real>
Var<Real> sigmoid_difference(const Var<Real>& lower, const Var<Real>& upper) {
  require_same_shape(lower.shape(), upper.shape(), "sigmoid_difference");
  Tensor<Real> out(lower.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = static_cast<Real>(sigmoid_diff_value(lower.value()[i], upper.value()[i]));
  }
  return make_op<Real>("sigmoid_difference", std::move(out), {lower, upper},
                       [](Node<Real>& self) {
    Node<Real>& nl = *self.inputs[0];
    Node<Real>& nu = *self.inputs[1];
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
      const double l = nl.value[i], u = nu.value[i];
      const double s = l + u > 0.0 ? -1.0 : 1.0;
      const double su = logistic(s * u), sl = logistic(s * l);
      const double dir = su >= sl ? 1.0 : -1.0;
      const double g = self.grad[i];
      if (nu.requires_grad) nu.grad_buffer()[i] += static_cast<Real>(g * dir * s * su * (1 - su));
      if (nl.requires_grad) nl.grad_buffer()[i] -= static_cast<Real>(g * dir * s * sl * (1 - sl));
    }
  });
}

template <typename Real>
FactorizedPrior<Real>::FactorizedPrior(std::int64_t channels, std::mt19937_64& rng)
    : channels_(channels) {
  if (channels <= 0) throw std::invalid_argument("FactorizedPrior: channels must be positive");
  const double scale = std::pow(kPriorInitScale, 1.0 / (kWidths.size() - 1));
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  for (int i = 0; i < kPriorLayers; ++i) {
    const int in = kWidths[i], out = kWidths[i + 1];
    const double init = std::log(std::expm1(1.0 / scale / out));
    matrices_.push_back(Var<Real>::parameter(
        Tensor<Real>(Shape{channels, in * out, 1, 1}, static_cast<Real>(init))));
    Tensor<Real> bias(Shape{channels, out, 1, 1});
    for (Real& b : bias.data()) b = static_cast<Real>(uniform(rng));
    biases_.push_back(Var<Real>::parameter(std::move(bias)));
  }
  for (int i = 0; i < kPriorLayers - 1; ++i) {
    factors_.push_back(Var<Real>::parameter(Tensor<Real>(Shape{channels, 3, 1, 1})));
  }
  Tensor<Real> q(Shape{1, channels, 1, 3});
  for (std::int64_t c = 0; c < channels; ++c) {
    q.at(0, c, 0, 0) = static_cast<Real>(-kPriorInitScale);
    q.at(0, c, 0, 2) = static_cast<Real>(kPriorInitScale);
  }
  quantiles_ = Var<Real>::parameter(std::move(q));
}

template <typename Real>
std::vector<Var<Real>> FactorizedPrior<Real>::density_parameters() const {
  std::vector<Var<Real>> out(matrices_);
  out.insert(out.end(), biases_.begin(), biases_.end());
  out.insert(out.end(), factors_.begin(), factors_.end());
  return out;
}

template <typename Real>
Var<Real> FactorizedPrior<Real>::logits_with(const Var<Real>& x,
                                             const std::vector<Var<Real>>& params) const {
  if (x.shape().c != channels_) {
    throw std::invalid_argument("FactorizedPrior: input " + x.shape().to_string() +
                                " does not have " + std::to_string(channels_) + " channels");
  }
  return density_logits_op(x, params);
}

template <typename Real>
Var<Real> FactorizedPrior<Real>::cumulative_logits(const Var<Real>& x) const {
  return logits_with(x, density_parameters());
}

template <typename Real>
Var<Real> FactorizedPrior<Real>::likelihood(const Var<Real>& x) const {
  const Var<Real> lower = cumulative_logits(add_scalar(x, Real(-0.5)));
  const Var<Real> upper = cumulative_logits(add_scalar(x, Real(0.5)));
  return lower_bound(sigmoid_difference(lower, upper), static_cast<Real>(kLikelihoodBound));
}

template <typename Real>
Var<Real> FactorizedPrior<Real>::aux_loss() const {
  std::vector<Var<Real>> frozen;
  for (const auto& p : density_parameters()) frozen.push_back(detach(p));
  const Var<Real> logits = logits_with(quantiles_, frozen);
  const double tail = std::log(2.0 / kLikelihoodBound - 1.0);
  Tensor<Real> value(Shape{1, 1, 1, 1});
  for (std::int64_t c = 0; c < channels_; ++c) {
    value[0] += std::abs(logits.value().at(0, c, 0, 0) + static_cast<Real>(tail)) +
                std::abs(logits.value().at(0, c, 0, 1)) +
                std::abs(logits.value().at(0, c, 0, 2) - static_cast<Real>(tail));
  }
  return make_op<Real>("prior_aux", std::move(value), {logits}, [tail](Node<Real>& self) {
    Node<Real>& in = *self.inputs[0];
    if (!in.requires_grad) return;
    const std::array<double, 3> target{-tail, 0.0, tail};
    const Real g = self.grad[0];
    Tensor<Real>& gi = in.grad_buffer();
    for (std::int64_t i = 0; i < gi.numel(); ++i) {
      const double d = in.value[i] - target[static_cast<std::size_t>(i % 3)];
      gi[i] += d > 0 ? g : (d < 0 ? -g : Real(0));
    }
  });
}

template <typename Real>
Tensor<Real> FactorizedPrior<Real>::medians() const {
  Tensor<Real> out(Shape{1, channels_, 1, 1});
  for (std::int64_t c = 0; c < channels_; ++c) out[c] = quantiles_.value().at(0, c, 0, 1);
  return out;
}

template <typename Real>
std::vector<double> FactorizedPrior<Real>::channel_pmf(std::int64_t c) const {
  ChannelDensity d;
  d.load(param_values(density_parameters()), c);
  DensityTrace trace;
  const double median = quantiles_.value().at(0, c, 0, 1);
  std::vector<double> pmf(static_cast<std::size_t>(kSupportSize));
  double lower = density_logit(d, median + kSupportMin - 0.5, trace);
  for (std::int64_t s = kSupportMin; s <= kSupportMax; ++s) {
    const double upper = density_logit(d, median + s + 0.5, trace);
    pmf[static_cast<std::size_t>(s - kSupportMin)] =
        std::max(sigmoid_diff_value(lower, upper), kProbFloor);
    lower = upper;
  }
  return pmf;
}

template <typename Real>
void FactorizedPrior<Real>::collect_parameters(const std::string& prefix,
                                               std::vector<NamedParameter<Real>>& out) const {
  for (int i = 0; i < kPriorLayers; ++i) {
    out.push_back({prefix + "matrix" + std::to_string(i), matrices_[i]});
    out.push_back({prefix + "bias" + std::to_string(i), biases_[i]});
    if (i < kPriorLayers - 1) out.push_back({prefix + "factor" + std::to_string(i), factors_[i]});
  }
  out.push_back({prefix + "quantiles", quantiles_});
}

#define RESCOMP_INSTANTIATE_ENTROPY(Real)                                          \
  template Var<Real> quantize(const Var<Real>&, QuantMode, std::mt19937_64&);       \
  template Tensor<Real> quantize_around(const Tensor<Real>&, const Tensor<Real>&);  \
  template Var<Real> gaussian_likelihood(const Var<Real>&, const Var<Real>&,        \
                                         const Var<Real>&);                         \
  template Var<Real> lower_bound(const Var<Real>&, Real);                           \
  template Var<Real> total_bits(const Var<Real>&);                                  \
  template Var<Real> sigmoid_difference(const Var<Real>&, const Var<Real>&);        \
  template class FactorizedPrior<Real>;

RESCOMP_INSTANTIATE_ENTROPY(float)
RESCOMP_INSTANTIATE_ENTROPY(double)

}  // namespace rescomp
