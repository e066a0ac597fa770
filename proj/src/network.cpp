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

#include "rescomp/network.hpp"

#include <cmath>
#include <stdexcept>

namespace rescomp {
namespace {

template <typename Real>
std::unique_ptr<Module<Real>> make_layer(const LayerSpec& spec, Real slope,
                                         std::mt19937_64& rng) {
  const Activation act = spec.leaky ? Activation::kLeakyRelu : Activation::kNone;
  switch (spec.kind) {
    case LayerKind::kConv:
    case LayerKind::kDense1x1:
      return Conv2d<Real>::create(spec.c_in, spec.c_out, spec.kernel, spec.stride,
                                  spec.has_bias, act, slope, rng);
    case LayerKind::kTConv:
      return ConvTranspose2d<Real>::create(spec.c_in, spec.c_out, spec.kernel,
                                           spec.stride, spec.has_bias, act, slope, rng);
    case LayerKind::kSubpixel:
      return SubpixelConv<Real>::create(spec.c_in, spec.c_out / 4, spec.kernel, 2,
                                        spec.has_bias, act, slope, rng);
    case LayerKind::kGdn:
    case LayerKind::kIgdn:
      return std::make_unique<Gdn<Real>>(spec.c_out, spec.kind == LayerKind::kIgdn);
    case LayerKind::kQuantizer:
    case LayerKind::kFactorizedPrior:
      break;
  }
  throw std::logic_error("make_layer: " + spec.name + " has no runtime module");
}

std::string unit_name(const std::string& member) {
  return member.substr(0, member.rfind('.'));
}

template <typename Real>
std::unique_ptr<Sequential<Real>> build_section(const ModelConfig& config,
                                                Section section, std::mt19937_64& rng) {
  auto seq = std::make_unique<Sequential<Real>>();
  const Real slope = static_cast<Real>(config.slope);
  const auto& layers = config.layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    if (spec.section != section) continue;
    if (spec.unit < 0) {
      if (spec.kind != LayerKind::kQuantizer && spec.kind != LayerKind::kFactorizedPrior) {
        seq->add(spec.name, make_layer<Real>(spec, slope, rng));
      }
      continue;
    }
    std::vector<std::unique_ptr<Module<Real>>> branch;
    std::unique_ptr<Module<Real>> norm;
    std::unique_ptr<Module<Real>> shortcut;
    std::size_t j = i;
    for (; j < layers.size() && layers[j].unit == spec.unit; ++j) {
      const LayerSpec& member = layers[j];
      auto module = make_layer<Real>(member, slope, rng);
      if (member.role == UnitRole::kShortcut) {
        shortcut = std::move(module);
      } else if (member.kind == LayerKind::kGdn || member.kind == LayerKind::kIgdn) {
        norm = std::move(module);
      } else {
        branch.push_back(std::move(module));
      }
    }
    if (branch.empty() || branch.size() > 2) {
      throw std::logic_error("build_section: malformed residual unit " + spec.name);
    }
    std::unique_ptr<Module<Real>> second = branch.size() > 1 ? std::move(branch[1]) : nullptr;
    seq->add(unit_name(spec.name),
             std::make_unique<ResidualUnit<Real>>(std::move(branch[0]), std::move(norm),
                                                  std::move(second), std::move(shortcut),
                                                  slope));
    i = j - 1;
  }
  return seq;
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}

}  // namespace

template <typename Real>
CompressionModel<Real>::CompressionModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  if (config_.layers.empty()) resolve_layers(config_);
  std::mt19937_64 rng(seed);
  encoder_ = build_section<Real>(config_, Section::kEncoder, rng);
  if (config_.has_hyperprior()) {
    hyper_encoder_ = build_section<Real>(config_, Section::kHyperEncoder, rng);
    hyper_decoder_ = build_section<Real>(config_, Section::kHyperDecoder, rng);
    auto head = build_section<Real>(config_, Section::kEntropyHead, rng);
    hyper_decoder_->add("head", std::move(head));
  }
  decoder_ = build_section<Real>(config_, Section::kDecoder, rng);
  prior_ = std::make_unique<FactorizedPrior<Real>>(config_.bottleneck, rng);
}

template <typename Real>
std::vector<NamedParameter<Real>> CompressionModel<Real>::parameters() const {
  std::vector<NamedParameter<Real>> out;
  encoder_->collect_parameters("", out);
  if (hyper_encoder_) {
    hyper_encoder_->collect_parameters("", out);
    hyper_decoder_->collect_parameters("", out);
  }
  decoder_->collect_parameters("", out);
  prior_->collect_parameters("FactorizedPrior.", out);
  // The head is nested one level down; drop its prefix so names match specs.
  for (auto& p : out) {
    if (p.name.rfind("head.", 0) == 0) p.name.erase(0, 5);
  }
  return out;
}

template <typename Real>
std::vector<Var<Real>> CompressionModel<Real>::model_parameters() const {
  std::vector<Var<Real>> out;
  for (const auto& p : parameters()) {
    if (p.var.node() != prior_->quantiles().node()) out.push_back(p.var);
  }
  return out;
}

template <typename Real>
std::int64_t CompressionModel<Real>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& p : parameters()) total += p.var.value().numel();
  return total;
}

template <typename Real>
void CompressionModel<Real>::check_input(const Shape& s) const {
  const std::int64_t m = config_.size_multiple();
  if (s.c != 3 || s.h % m != 0 || s.w % m != 0 || s.h == 0 || s.w == 0) {
    throw std::invalid_argument("CompressionModel: input " + s.to_string() +
                                " needs 3 channels and sides divisible by " + std::to_string(m));
  }
}

template <typename Real>
Var<Real> CompressionModel<Real>::analysis(const Var<Real>& x) const {
  check_input(x.shape());
  return encoder_->forward(x);
}

template <typename Real>
Var<Real> CompressionModel<Real>::hyper_analysis(const Var<Real>& y) const {
  if (!hyper_encoder_) throw std::logic_error("hyper_analysis: model has no hyperprior");
  return hyper_encoder_->forward(y);
}

template <typename Real>
EntropyParams<Real> CompressionModel<Real>::entropy_parameters(const Var<Real>& z_hat) const {
  if (!hyper_decoder_) throw std::logic_error("entropy_parameters: model has no hyperprior");
  const Var<Real> h = hyper_decoder_->forward(z_hat);
  const std::int64_t m = config_.bottleneck;
  const Var<Real> raw = clamp(slice_channels(h, m, m), static_cast<Real>(std::log(kSigmaMin)),
                              static_cast<Real>(std::log(kSigmaMax)));
  const Var<Real> sigma = clamp(exp(raw), static_cast<Real>(kSigmaMin), static_cast<Real>(kSigmaMax));
  return {slice_channels(h, 0, m), sigma};
}

template <typename Real>
Var<Real> CompressionModel<Real>::synthesis(const Var<Real>& y_hat) const {
  return decoder_->forward(y_hat);
}

template <typename Real>
ForwardResult<Real> CompressionModel<Real>::forward(const Var<Real>& x, QuantMode mode,
                                                    std::mt19937_64& rng) const {
  ForwardResult<Real> r;
  r.y = analysis(x);
  const auto bound = static_cast<Real>(kLikelihoodBound);
  auto quantize_prior_input = [&](const Var<Real>& v) {
    return mode == QuantMode::kTrain ? quantize(v, mode, rng)
                                     : constant(quantize_around(v.value(), prior_->medians()));
  };
  if (config_.has_hyperprior()) {
    r.z = hyper_analysis(r.y);
    r.z_hat = quantize_prior_input(r.z);
    r.z_bits = total_bits(prior_->likelihood(r.z_hat));
    r.params = entropy_parameters(r.z_hat);
    r.y_hat = quantize(r.y, mode, rng);
    r.y_bits = total_bits(lower_bound(gaussian_likelihood(r.y_hat, r.params.mu, r.params.sigma), bound));
  } else {
    r.y_hat = quantize_prior_input(r.y);
    r.y_bits = total_bits(prior_->likelihood(r.y_hat));
    r.z_bits = constant(Tensor<Real>::scalar(Real(0)));
  }
  r.x_hat = synthesis(r.y_hat);
  return r;
}

template <typename Real>
Tensor<Real> reflect_pad(const Tensor<Real>& x, std::int64_t multiple) {
  const Shape s = x.shape();
  const std::int64_t h = (s.h + multiple - 1) / multiple * multiple;
  const std::int64_t w = (s.w + multiple - 1) / multiple * multiple;
  if (h == s.h && w == s.w) return x;
  Tensor<Real> out(Shape{s.n, s.c, h, w});
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (std::int64_t i = 0; i < h; ++i) {
        const std::int64_t si = reflect_index(i, s.h);
        for (std::int64_t j = 0; j < w; ++j) {
          out.at(n, c, i, j) = x.at(n, c, si, reflect_index(j, s.w));
        }
      }
    }
  }
  return out;
}

template <typename Real>
Tensor<Real> crop(const Tensor<Real>& x, std::int64_t height, std::int64_t width) {
  const Shape s = x.shape();
  if (height > s.h || width > s.w) {
    throw std::invalid_argument("crop: " + std::to_string(height) + "x" + std::to_string(width) +
                                " exceeds " + s.to_string());
  }
  Tensor<Real> out(Shape{s.n, s.c, height, width});
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (std::int64_t i = 0; i < height; ++i) {
        for (std::int64_t j = 0; j < width; ++j) out.at(n, c, i, j) = x.at(n, c, i, j);
      }
    }
  }
  return out;
}

template class CompressionModel<float>;
template class CompressionModel<double>;
template Tensor<float> reflect_pad(const Tensor<float>&, std::int64_t);
template Tensor<double> reflect_pad(const Tensor<double>&, std::int64_t);
template Tensor<float> crop(const Tensor<float>&, std::int64_t, std::int64_t);
template Tensor<double> crop(const Tensor<double>&, std::int64_t, std::int64_t);

}  // namespace rescomp
