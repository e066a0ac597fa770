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

#include "rescomp/codec.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <stdexcept>

#include "rescomp/io_error.hpp"

namespace rescomp {
namespace {

constexpr std::array<std::uint8_t, 4> kCheckpointMagic = {'R', 'C', 'K', 'P'};
static_assert(std::endian::native == std::endian::little, "little-endian host expected");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void bytes(void* p, std::size_t n) {
    if (b_.size() - pos_ < n) throw CorruptStreamError("checkpoint: truncated");
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (b_.size() - pos_ < n) throw CorruptStreamError("checkpoint: truncated string");
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::int64_t latent_side(std::int64_t padded, const ModelConfig& c) {
  return padded >> c.stages;
}

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const CompressionModel<float>& model, std::uint64_t step) {
  Writer w;
  w.bytes(kCheckpointMagic.data(), 4);
  w.u32(kCheckpointVersion);
  w.str(to_config_text(model.config()));
  w.u64(step);
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    const Shape s = p.var.shape();
    for (std::int64_t d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(p.var.value().raw(), static_cast<std::size_t>(s.numel()) * sizeof(float));
  }
  return w.take();
}

CompressionModel<float> model_from_checkpoint(std::span<const std::uint8_t> bytes,
                                              std::uint64_t* step) {
  Reader r(bytes);
  std::array<std::uint8_t, 4> magic{};
  r.bytes(magic.data(), 4);
  if (magic != kCheckpointMagic) throw CorruptStreamError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CorruptStreamError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelConfig config;
  try {
    config = parse_config_text(r.str());
  } catch (const std::invalid_argument& e) {
    throw CorruptStreamError(std::string("checkpoint: ") + e.what());
  }
  const std::uint64_t saved_step = r.u64();
  CompressionModel<float> model(config, 0);
  std::map<std::string, Var<float>> slots;
  for (auto& p : model.parameters()) slots.emplace(p.name, p.var);
  const std::uint32_t count = r.u32();
  if (count != slots.size()) {
    throw CorruptStreamError("checkpoint: " + std::to_string(count) + " arrays, model has " +
                             std::to_string(slots.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    Shape s;
    s.n = r.u32();
    s.c = r.u32();
    s.h = r.u32();
    s.w = r.u32();
    auto it = slots.find(name);
    if (it == slots.end()) throw CorruptStreamError("checkpoint: unknown array " + name);
    Var<float> var = it->second;
    if (!(var.shape() == s)) {
      throw CorruptStreamError("checkpoint: " + name + " has shape " + s.to_string() +
                               ", model expects " + var.shape().to_string());
    }
    r.bytes(var.mutable_value().raw(), static_cast<std::size_t>(s.numel()) * sizeof(float));
    slots.erase(it);
  }
  if (!r.done()) throw CorruptStreamError("checkpoint: trailing bytes");
  if (step) *step = saved_step;
  return model;
}

void save_checkpoint(const std::string& path, const CompressionModel<float>& model,
                     std::uint64_t step) {
  write_file(path, checkpoint_bytes(model, step));
}

CompressionModel<float> load_checkpoint(const std::string& path, std::uint64_t* step) {
  return model_from_checkpoint(read_file(path), step);
}

Compressed compress(const CompressionModel<float>& model, const Image& image, bool model_flag) {
  if (image.width > 0xFFFF || image.height > 0xFFFF) {
    throw std::invalid_argument("compress: image sides must fit in 16 bits");
  }
  NoGradGuard no_grad;
  const ModelConfig& config = model.config();
  const Tensor<float> x = reflect_pad(to_tensor<float>(image), config.size_multiple());
  const Var<float> y = model.analysis(Var<float>(x));
  const auto& prior = model.prior();
  const auto tables = prior_tables(prior);
  const Tensor<float> medians = prior.medians();

  Compressed out;
  Bitstream stream;
  stream.model_flag = model_flag;
  stream.width = static_cast<std::uint16_t>(image.width);
  stream.height = static_cast<std::uint16_t>(image.height);
  if (config.has_hyperprior()) {
    const Var<float> z = model.hyper_analysis(y);
    const Tensor<float> z_hat = quantize_around(z.value(), medians);
    stream.z_bytes = encode_factorized(z_hat, medians, tables, &out.stats);
    const auto params = model.entropy_parameters(Var<float>(z_hat));
    Tensor<float> y_hat = y.value();
    for (float& v : y_hat.data()) v = std::nearbyint(v);
    stream.y_bytes = encode_gaussian(y_hat, params.mu.value(), params.sigma.value(), &out.stats);
  } else {
    const Tensor<float> y_hat = quantize_around(y.value(), medians);
    stream.y_bytes = encode_factorized(y_hat, medians, tables, &out.stats);
  }
  out.file = serialize(stream);
  return out;
}

Decompressed decompress(const CompressionModel<float>& model, std::span<const std::uint8_t> file) {
  NoGradGuard no_grad;
  const Bitstream stream = deserialize(file);
  const ModelConfig& config = model.config();
  const std::int64_t m = config.size_multiple();
  const std::int64_t ph = (stream.height + m - 1) / m * m;
  const std::int64_t pw = (stream.width + m - 1) / m * m;
  const Shape y_shape{1, config.bottleneck, latent_side(ph, config), latent_side(pw, config)};
  const auto& prior = model.prior();
  const auto tables = prior_tables(prior);
  const Tensor<float> medians = prior.medians();
  Tensor<float> y_hat;
  if (config.has_hyperprior()) {
    const Shape z_shape{1, config.bottleneck, y_shape.h / 4, y_shape.w / 4};
    const Tensor<float> z_hat = decode_factorized(stream.z_bytes, z_shape, medians, tables);
    const auto params = model.entropy_parameters(Var<float>(z_hat));
    y_hat = decode_gaussian(stream.y_bytes, params.mu.value(), params.sigma.value());
  } else {
    if (!stream.z_bytes.empty()) throw CorruptStreamError("bitstream: unexpected z payload");
    y_hat = decode_factorized(stream.y_bytes, y_shape, medians, tables);
  }
  const Var<float> x_hat = model.synthesis(Var<float>(y_hat));
  Decompressed out;
  out.image = to_image(crop(x_hat.value(), stream.height, stream.width));
  out.model_flag = stream.model_flag;
  return out;
}

}  // namespace rescomp
