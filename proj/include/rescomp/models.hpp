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

// Declarative architecture descriptions. A ModelConfig carries the full
// layer list resolved against a reference input; the runtime network and the
// complexity analyzer are both built from it.

#ifndef RESCOMP_MODELS_HPP_
#define RESCOMP_MODELS_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rescomp {

enum class LayerKind {
  kConv,
  kTConv,
  kSubpixel,  // c_out counts conv channels before the shuffle
  kGdn,
  kIgdn,
  kDense1x1,
  kQuantizer,
  kFactorizedPrior,
};

enum class Section {
  kEncoder,
  kLatent,  // quantizer on y (and the prior in the Baseline family)
  kHyperEncoder,
  kHyperLatent,
  kHyperDecoder,
  kEntropyHead,
  kDecoder,
};

enum class UnitRole { kPlain, kBranch, kShortcut };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  Section section = Section::kEncoder;
  int kernel = 1;
  int stride = 1;
  int c_in = 0;
  int c_out = 0;
  bool has_bias = true;
  bool leaky = false;  // leaky ReLU after a plain layer
  int unit = -1;       // residual unit id, -1 for plain layers
  UnitRole role = UnitRole::kPlain;
  std::int64_t out_h = 0;  // resolved at the reference input
  std::int64_t out_w = 0;
};

enum class Family { kBaseline, kHyperPrior, kResNet };
enum class Upsampler { kTConv, kSubpixel };
enum class Distortion { kMse, kMsSsim };

struct ModelConfig {
  Family family = Family::kHyperPrior;
  int kernel = 9;  // Baseline / HyperPrior
  int depth = 4;   // ResNet: 3x3 convs per stage
  Upsampler upsampler = Upsampler::kTConv;
  int channels = 128;    // main width N
  int bottleneck = 128;  // latent width M
  int stages = 4;        // stride-2 stages in the main encoder
  double lambda = 0.015;
  Distortion distortion = Distortion::kMse;
  double slope = 0.2;
  std::string gdn_form = "sqrt";  // y = x / sqrt(beta + gamma x^2)
  std::int64_t reference_size = 256;
  std::vector<LayerSpec> layers;

  bool has_hyperprior() const { return family != Family::kBaseline; }
  // Padded input sides must be multiples of this.
  std::int64_t size_multiple() const {
    return (std::int64_t{1} << stages) * (has_hyperprior() ? 4 : 1);
  }
  std::string name() const;
};

inline constexpr int kPriorFilters = 3;
// Per-channel density parameters of the factorized prior plus its three
// learned quantiles.
constexpr std::int64_t factorized_prior_param_count(std::int64_t channels) {
  return 46 * channels;
}

// Fills config.layers from the scalar fields. Throws std::invalid_argument on
// invalid settings.
void resolve_layers(ModelConfig& config);

ModelConfig build_hyperprior(int kernel, int bottleneck = 128,
                             Upsampler upsampler = Upsampler::kTConv);
ModelConfig build_baseline(int kernel);
ModelConfig build_resnet(int depth, Upsampler upsampler, int bottleneck = 128);

// Text form: one "key = value" per line, '#' starts a comment.
std::string to_config_text(const ModelConfig& config);
ModelConfig parse_config_text(std::string_view text);
ModelConfig load_config_file(const std::string& path);

// Parses "baseline" / "hyperprior" / "resnet" and the like.
Family parse_family(std::string_view s);
Upsampler parse_upsampler(std::string_view s);
Distortion parse_distortion(std::string_view s);
std::string_view to_string(Family f);
std::string_view to_string(Upsampler u);
std::string_view to_string(Distortion d);
std::string_view to_string(LayerKind k);

}  // namespace rescomp

#endif  // RESCOMP_MODELS_HPP_
