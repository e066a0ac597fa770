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

#include "rescomp/models.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rescomp/io_error.hpp"

namespace rescomp {
namespace {

// Appends layers while tracking the spatial size at the reference input.
class SpecBuilder {
 public:
  explicit SpecBuilder(ModelConfig& config)
      : layers_(config.layers), h_(config.reference_size), w_(h_) {}

  void set_section(Section s) { section_ = s; }
  int new_unit() { return next_unit_++; }
  std::int64_t h() const { return h_; }
  std::int64_t w() const { return w_; }
  void set_size(std::int64_t h, std::int64_t w) {
    h_ = h;
    w_ = w;
  }

  // Strided conv or dense layer; advances the tracked size.
  LayerSpec& conv(std::string name, int k, int stride, int c_in, int c_out,
                  bool bias = true, bool leaky = false,
                  LayerKind kind = LayerKind::kConv) {
    h_ = (h_ + stride - 1) / stride;
    w_ = (w_ + stride - 1) / stride;
    return push(std::move(name), kind, k, stride, c_in, c_out, bias, leaky);
  }
  LayerSpec& tconv(std::string name, int k, int stride, int c_in, int c_out,
                   bool bias = true, bool leaky = false) {
    h_ *= stride;
    w_ *= stride;
    return push(std::move(name), LayerKind::kTConv, k, stride, c_in, c_out,
                bias, leaky);
  }
  // Conv at the current size to 4 * c_out channels; the tracked size doubles
  // after the row is recorded.
  LayerSpec& subpixel(std::string name, int k, int c_in, int c_out,
                      bool bias = true, bool leaky = false) {
    push(std::move(name), LayerKind::kSubpixel, k, 1, c_in, 4 * c_out, bias,
         leaky);
    h_ *= 2;
    w_ *= 2;
    return layers_.back();
  }
  LayerSpec& upsample(Upsampler up, std::string name, int k, int c_in,
                      int c_out, bool bias = true, bool leaky = false) {
    return up == Upsampler::kTConv ? tconv(std::move(name), k, 2, c_in, c_out, bias, leaky)
                                   : subpixel(std::move(name), k, c_in, c_out, bias, leaky);
  }
  LayerSpec& norm(std::string name, int channels, bool inverse) {
    return push(std::move(name), inverse ? LayerKind::kIgdn : LayerKind::kGdn, 1,
                1, channels, channels, false, false);
  }
  LayerSpec& marker(std::string name, LayerKind kind, int channels) {
    return push(std::move(name), kind, 1, 1, channels, channels, false, false);
  }

 private:
  LayerSpec& push(std::string name, LayerKind kind, int k, int stride,
                  int c_in, int c_out, bool bias, bool leaky) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = kind;
    s.section = section_;
    s.kernel = k;
    s.stride = stride;
    s.c_in = c_in;
    s.c_out = c_out;
    s.has_bias = bias;
    s.leaky = leaky;
    s.out_h = h_;
    s.out_w = w_;
    layers_.push_back(std::move(s));
    return layers_.back();
  }

  std::vector<LayerSpec>& layers_;
  std::int64_t h_;
  std::int64_t w_;
  Section section_ = Section::kEncoder;
  int next_unit_ = 0;
};

std::string idx(const char* prefix, int i) {
  return prefix + std::to_string(i);
}

void add_plain_autoencoder(const ModelConfig& c, SpecBuilder& b) {
  const int n = c.channels;
  const int m = c.bottleneck;
  b.set_section(Section::kEncoder);
  int c_in = 3;
  for (int i = 1; i <= c.stages; ++i) {
    const bool last = i == c.stages;
    b.conv(idx("conv", i), c.kernel, 2, c_in, last ? m : n, !last);
    if (!last) b.norm(idx("gdn", i), n, false);
    c_in = n;
  }
}

void add_plain_decoder(const ModelConfig& c, SpecBuilder& b) {
  const int n = c.channels;
  b.set_section(Section::kDecoder);
  const char* prefix = c.upsampler == Upsampler::kTConv ? "Tconv" : "SPconv";
  int c_in = c.bottleneck;
  for (int i = 1; i <= c.stages; ++i) {
    const bool last = i == c.stages;
    b.upsample(c.upsampler, idx(prefix, i), c.kernel, c_in, last ? 3 : n);
    if (!last) b.norm(idx("igdn", i), n, true);
    c_in = n;
  }
}

// Residual unit whose first conv is optionally strided. Branch:
// conv_a -> (GDN | LReLU) -> conv_b -> LReLU, plus a shortcut.
void add_unit(SpecBuilder& b, const std::string& name, int c_in, int c_out,
              int convs, bool down) {
  const int unit = b.new_unit();
  const std::int64_t h0 = b.h(), w0 = b.w();
  LayerSpec& a = b.conv(name + ".conv_a", 3, down ? 2 : 1, c_in, c_out);
  a.unit = unit;
  a.role = UnitRole::kBranch;
  if (down) {
    LayerSpec& g = b.norm(name + ".norm", c_out, false);
    g.unit = unit;
    g.role = UnitRole::kBranch;
  }
  if (convs > 1) {
    LayerSpec& cb = b.conv(name + ".conv_b", 3, 1, c_out, c_out);
    cb.unit = unit;
    cb.role = UnitRole::kBranch;
  }
  if (down || c_in != c_out) {
    const std::int64_t h1 = b.h(), w1 = b.w();
    b.set_size(h0, w0);
    LayerSpec& s = b.conv(name + ".shortcut", 1, down ? 2 : 1, c_in, c_out);
    s.unit = unit;
    s.role = UnitRole::kShortcut;
    b.set_size(h1, w1);
  }
}

void add_up_unit(SpecBuilder& b, Upsampler up, const std::string& name,
                 int channels) {
  const int unit = b.new_unit();
  const std::int64_t h0 = b.h(), w0 = b.w();
  LayerSpec& a = b.upsample(up, name + ".conv_a", 3, channels, channels);
  a.unit = unit;
  a.role = UnitRole::kBranch;
  LayerSpec& g = b.norm(name + ".norm", channels, true);
  g.unit = unit;
  g.role = UnitRole::kBranch;
  LayerSpec& cb = b.conv(name + ".conv_b", 3, 1, channels, channels);
  cb.unit = unit;
  cb.role = UnitRole::kBranch;
  const std::int64_t h1 = b.h(), w1 = b.w();
  b.set_size(h0, w0);
  LayerSpec& s = b.upsample(up, name + ".shortcut", 1, channels, channels);
  s.unit = unit;
  s.role = UnitRole::kShortcut;
  b.set_size(h1, w1);
}

void add_resnet_autoencoder(const ModelConfig& c, SpecBuilder& b) {
  const int n = c.channels;
  const int identity_convs = c.depth - 2;
  b.set_section(Section::kEncoder);
  int c_in = 3;
  for (int s = 1; s < c.stages; ++s) {
    const std::string stage = idx("E", s);
    add_unit(b, stage + ".down", c_in, n, 2, true);
    add_unit(b, stage + ".res", n, n, identity_convs, false);
    c_in = n;
  }
  b.conv(idx("E", c.stages) + ".conv", 3, 2, c_in, c.bottleneck);
}

void add_resnet_decoder(const ModelConfig& c, SpecBuilder& b) {
  const int n = c.channels;
  const int identity_convs = c.depth - 2;
  b.set_section(Section::kDecoder);
  int c_in = c.bottleneck;
  for (int s = 1; s < c.stages; ++s) {
    const std::string stage = idx("D", s);
    add_unit(b, stage + ".res", c_in, n, identity_convs, false);
    add_up_unit(b, c.upsampler, stage + ".up", n);
    c_in = n;
  }
  b.upsample(c.upsampler, idx("D", c.stages) + ".conv", 3, c_in, 3);
}

void add_hyperprior(const ModelConfig& c, SpecBuilder& b) {
  const int m = c.bottleneck;
  const int n = c.channels;
  const std::int64_t h = b.h(), w = b.w();
  b.set_section(Section::kHyperEncoder);
  b.conv("Hconv1", 3, 1, m, m, true, true);
  b.conv("Hconv2", 5, 2, m, m, true, true);
  b.conv("Hconv3", 5, 2, m, m);
  b.set_section(Section::kHyperLatent);
  b.marker("Qz", LayerKind::kQuantizer, m);
  b.marker("FactorizedPrior", LayerKind::kFactorizedPrior, m);
  b.set_section(Section::kHyperDecoder);
  b.tconv("HTconv1", 5, 2, m, m, true, true);
  b.tconv("HTconv2", 5, 2, m, 3 * m / 2, true, true);
  b.tconv("HTconv3", 3, 1, 3 * m / 2, 2 * m, true, true);
  b.set_section(Section::kEntropyHead);
  b.conv("layer1", 1, 1, 2 * m, 5 * n, true, true, LayerKind::kDense1x1);
  b.conv("layer2", 1, 1, 5 * n, 4 * n, true, true, LayerKind::kDense1x1);
  b.conv("layer3", 1, 1, 4 * n, 2 * m, false, false, LayerKind::kDense1x1);
  b.set_size(h, w);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: bad value '" + value + "' for " + key);
  }
  return out;
}

}  // namespace

std::string ModelConfig::name() const {
  std::string out;
  switch (family) {
    case Family::kBaseline:
      out = "Baseline-" + std::to_string(kernel);
      break;
    case Family::kHyperPrior:
      out = "HyperPrior-" + std::to_string(kernel);
      break;
    case Family::kResNet:
      out = "ResNet-3x3(" + std::to_string(depth) + ")";
      break;
  }
  if (upsampler == Upsampler::kSubpixel) out += "-SubPixel";
  if (bottleneck != channels) out += "-" + std::to_string(bottleneck);
  if (stages != 4 || channels != 128) {
    out += " [N=" + std::to_string(channels) + ", stages=" + std::to_string(stages) + "]";
  }
  return out;
}

void resolve_layers(ModelConfig& config) {
  if (config.stages < 1 || config.channels < 1 || config.bottleneck < 1) {
    throw std::invalid_argument("model: stages, channels and bottleneck must be positive");
  }
  if (config.bottleneck % 2 != 0) {
    throw std::invalid_argument("model: bottleneck width must be even");
  }
  if (config.family == Family::kResNet) {
    if (config.depth != 3 && config.depth != 4) {
      throw std::invalid_argument("model: ResNet depth must be 3 or 4, got " +
                                  std::to_string(config.depth));
    }
  } else if (config.kernel != 3 && config.kernel != 5 && config.kernel != 9) {
    throw std::invalid_argument("model: kernel must be 3, 5 or 9, got " +
                                std::to_string(config.kernel));
  }
  config.layers.clear();
  SpecBuilder b(config);
  if (config.family == Family::kResNet) {
    add_resnet_autoencoder(config, b);
  } else {
    add_plain_autoencoder(config, b);
  }
  b.set_section(Section::kLatent);
  b.marker("Q", LayerKind::kQuantizer, config.bottleneck);
  if (config.has_hyperprior()) {
    add_hyperprior(config, b);
  } else {
    b.marker("FactorizedPrior", LayerKind::kFactorizedPrior, config.bottleneck);
  }
  if (config.family == Family::kResNet) {
    add_resnet_decoder(config, b);
  } else {
    add_plain_decoder(config, b);
  }
}

ModelConfig build_hyperprior(int kernel, int bottleneck, Upsampler upsampler) {
  ModelConfig c;
  c.family = Family::kHyperPrior;
  c.kernel = kernel;
  c.bottleneck = bottleneck;
  c.upsampler = upsampler;
  resolve_layers(c);
  return c;
}

ModelConfig build_baseline(int kernel) {
  ModelConfig c;
  c.family = Family::kBaseline;
  c.kernel = kernel;
  resolve_layers(c);
  return c;
}

ModelConfig build_resnet(int depth, Upsampler upsampler, int bottleneck) {
  ModelConfig c;
  c.family = Family::kResNet;
  c.depth = depth;
  c.upsampler = upsampler;
  c.bottleneck = bottleneck;
  resolve_layers(c);
  return c;
}

std::string to_config_text(const ModelConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "family = " << to_string(c.family) << "\n"
     << "kernel = " << c.kernel << "\n"
     << "depth = " << c.depth << "\n"
     << "upsampler = " << to_string(c.upsampler) << "\n"
     << "channels = " << c.channels << "\n"
     << "bottleneck = " << c.bottleneck << "\n"
     << "stages = " << c.stages << "\n"
     << "lambda = " << c.lambda << "\n"
     << "distortion = " << to_string(c.distortion) << "\n"
     << "slope = " << c.slope << "\n"
     << "gdn_form = " << c.gdn_form << "\n";
  return os.str();
}

ModelConfig parse_config_text(std::string_view text) {
  ModelConfig c;
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = lower(trim(std::string_view(body).substr(0, eq)));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "family") {
      c.family = parse_family(value);
    } else if (key == "kernel" || key == "k") {
      c.kernel = parse_number<int>(key, value);
    } else if (key == "depth") {
      c.depth = parse_number<int>(key, value);
    } else if (key == "upsampler") {
      c.upsampler = parse_upsampler(value);
    } else if (key == "channels") {
      c.channels = parse_number<int>(key, value);
    } else if (key == "bottleneck" || key == "bottleneck_width") {
      c.bottleneck = parse_number<int>(key, value);
    } else if (key == "stages") {
      c.stages = parse_number<int>(key, value);
    } else if (key == "lambda") {
      c.lambda = parse_number<double>(key, value);
    } else if (key == "distortion") {
      c.distortion = parse_distortion(value);
    } else if (key == "slope") {
      c.slope = parse_number<double>(key, value);
    } else if (key == "gdn_form") {
      if (value != "sqrt") {
        throw std::invalid_argument("config: unsupported gdn_form '" + value + "'");
      }
      c.gdn_form = value;
    } else {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
    }
  }
  resolve_layers(c);
  return c;
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

Family parse_family(std::string_view s) {
  const std::string v = lower(s);
  if (v == "baseline") return Family::kBaseline;
  if (v == "hyperprior") return Family::kHyperPrior;
  if (v == "resnet") return Family::kResNet;
  throw std::invalid_argument("unknown family '" + std::string(s) +
                              "' (expected baseline, hyperprior or resnet)");
}

Upsampler parse_upsampler(std::string_view s) {
  const std::string v = lower(s);
  if (v == "tconv") return Upsampler::kTConv;
  if (v == "subpixel") return Upsampler::kSubpixel;
  throw std::invalid_argument("unknown upsampler '" + std::string(s) +
                              "' (expected tconv or subpixel)");
}

Distortion parse_distortion(std::string_view s) {
  const std::string v = lower(s);
  if (v == "mse") return Distortion::kMse;
  if (v == "msssim" || v == "ms-ssim" || v == "ms_ssim") return Distortion::kMsSsim;
  throw std::invalid_argument("unknown distortion '" + std::string(s) +
                              "' (expected mse or msssim)");
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kBaseline: return "baseline";
    case Family::kHyperPrior: return "hyperprior";
    case Family::kResNet: return "resnet";
  }
  return "?";
}

std::string_view to_string(Upsampler u) {
  return u == Upsampler::kTConv ? "tconv" : "subpixel";
}

std::string_view to_string(Distortion d) {
  return d == Distortion::kMse ? "mse" : "msssim";
}

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kTConv: return "tconv";
    case LayerKind::kSubpixel: return "subpixel";
    case LayerKind::kGdn: return "gdn";
    case LayerKind::kIgdn: return "igdn";
    case LayerKind::kDense1x1: return "dense1x1";
    case LayerKind::kQuantizer: return "quantizer";
    case LayerKind::kFactorizedPrior: return "factorized_prior";
  }
  return "?";
}

}  // namespace rescomp
