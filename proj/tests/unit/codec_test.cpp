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

#include <bit>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "rescomp/codec.hpp"
#include "rescomp/io_error.hpp"
#include "rescomp/training.hpp"
#include "support/pattern.hpp"

namespace rescomp {
namespace {

ModelConfig small_config(Family family) {
  ModelConfig c;
  c.family = family;
  c.kernel = 3;
  c.channels = 16;
  c.bottleneck = 16;
  c.stages = 2;
  resolve_layers(c);
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rescomp_codec_test_" + name);
}

TEST_CASE("bitstream header layout") {
  Bitstream s;
  s.model_flag = true;
  s.width = 0x1234;
  s.height = 0x0102;
  s.z_bytes = {9, 8, 7};
  s.y_bytes = {1, 2};
  const std::vector<std::uint8_t> b = serialize(s);
  const std::vector<std::uint8_t> want = {'R', 'S', 'C', 'P', 1, 1, 0x34, 0x12, 0x02, 0x01,
                                          3,   0,   0,   0,   9, 8, 7,    1,    2};
  CHECK(b == want);
  const Bitstream back = deserialize(b);
  CHECK(back.model_flag);
  CHECK(back.width == 0x1234);
  CHECK(back.height == 0x0102);
  CHECK(back.z_bytes == s.z_bytes);
  CHECK(back.y_bytes == s.y_bytes);

  s.model_flag = false;
  const std::vector<std::uint8_t> off = serialize(s);
  int differing_bits = 0;
  for (std::size_t i = 0; i < b.size(); ++i) differing_bits += std::popcount<std::uint8_t>(b[i] ^ off[i]);
  CHECK(differing_bits == 1);
  CHECK((b[5] ^ off[5]) == 1);
}

TEST_CASE("bitstream rejects malformed headers") {
  Bitstream s;
  s.width = s.height = 4;
  s.z_bytes = {1, 2, 3};
  const std::vector<std::uint8_t> good = serialize(s);
  auto bad_magic = good;
  bad_magic[0] = 'X';
  auto bad_version = good;
  bad_version[4] = 2;
  auto bad_flags = good;
  bad_flags[5] = 0x80;
  auto bad_length = good;
  bad_length[10] = 200;
  const std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 9);
  for (const auto& b : {bad_magic, bad_version, bad_flags, bad_length, short_header}) {
    CHECK_THROWS_AS(deserialize(b), CorruptStreamError);
  }
}

TEST_CASE("compress and decompress reproduce the eval-mode reconstruction") {
  const CompressionModel<float> model(small_config(Family::kHyperPrior), 3);
  testing::Lcg g(1);
  const Image img = testing::pattern_image(64, 64, g);
  const Compressed c = compress(model, img, false);
  const Bitstream parsed = deserialize(c.file);
  CHECK(parsed.width == 64);
  CHECK(parsed.height == 64);
  CHECK_FALSE(parsed.z_bytes.empty());
  CHECK(c.bpp(64, 64) == doctest::Approx(8.0 * c.file.size() / (64.0 * 64.0)));
  CHECK(8.0 * c.file.size() <= 1.02 * c.stats.information_bits + 8.0 * kBitstreamHeaderBytes + 64.0);
  CHECK(8.0 * (c.file.size() - kBitstreamHeaderBytes) >= c.stats.information_bits - 2.0);

  std::mt19937_64 rng(0);
  NoGradGuard no_grad;
  const ForwardResult<float> fwd = model.forward(Var<float>(to_tensor<float>(img)), QuantMode::kEval, rng);
  const Image expected = to_image(fwd.x_hat.value());
  const Decompressed d = decompress(model, c.file);
  CHECK_FALSE(d.model_flag);
  CHECK(d.image.rgb == expected.rgb);

  const Compressed again = compress(model, img, false);
  CHECK(again.file == c.file);
}

TEST_CASE("odd image sizes are padded and cropped") {
  for (Family family : {Family::kHyperPrior, Family::kBaseline}) {
    const CompressionModel<float> model(small_config(family), 4);
    testing::Lcg g(2);
    const Image img = testing::pattern_image(37, 50, g);
    const Compressed c = compress(model, img, true);
    const Decompressed d = decompress(model, c.file);
    CHECK(d.model_flag);
    CHECK(d.image.width == 50);
    CHECK(d.image.height == 37);
    if (family == Family::kBaseline) CHECK(deserialize(c.file).z_bytes.empty());
  }
}

TEST_CASE("decompress rejects damaged files") {
  const CompressionModel<float> model(small_config(Family::kHyperPrior), 5);
  testing::Lcg g(3);
  const Compressed c = compress(model, testing::pattern_image(32, 32, g), false);
  const std::vector<std::uint8_t> truncated(c.file.begin(), c.file.end() - 3);
  CHECK_THROWS_AS(decompress(model, truncated), CorruptStreamError);
  std::vector<std::uint8_t> extended = c.file;
  extended.insert(extended.end(), {1, 2, 3, 4});
  CHECK_THROWS_AS(decompress(model, extended), CorruptStreamError);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg = small_config(Family::kHyperPrior);
  cfg.lambda = 8;
  const CompressionModel<float> model(cfg, 6);
  const std::vector<std::uint8_t> bytes = checkpoint_bytes(model, 42);
  std::uint64_t step = 0;
  const CompressionModel<float> back = model_from_checkpoint(bytes, &step);
  CHECK(step == 42);
  CHECK(back.config().lambda == 8);
  const auto a = model.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    const auto va = a[i].var.value().data(), vb = b[i].var.value().data();
    CHECK(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
  }
  testing::Lcg g(4);
  const Image img = testing::pattern_image(48, 48, g);
  CHECK(compress(model, img, false).file == compress(back, img, false).file);

  const std::string path = temp_path("ckpt.rckp").string();
  save_checkpoint(path, model, 7);
  std::uint64_t loaded_step = 0;
  CHECK(load_checkpoint(path, &loaded_step).parameter_count() == model.parameter_count());
  CHECK(loaded_step == 7);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(model_from_checkpoint(bad), CorruptStreamError);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
  CHECK_THROWS_AS(model_from_checkpoint(cut), CorruptStreamError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(model_from_checkpoint(trailing), CorruptStreamError);
}

TEST_CASE("ppm round trip and errors") {
  testing::Lcg g(5);
  const Image img = testing::pattern_image(7, 9, g);
  const std::vector<std::uint8_t> bytes = format_ppm(img);
  const Image back = parse_ppm(bytes);
  CHECK(back.width == 9);
  CHECK(back.height == 7);
  CHECK(back.rgb == img.rgb);

  const std::string commented = "P6\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> c(commented.begin(), commented.end());
  c.insert(c.end(), {1, 2, 3, 4, 5, 6});
  CHECK(parse_ppm(c).at(0, 1, 2) == 6);

  const std::string p3 = "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(parse_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), IoError);
  std::vector<std::uint8_t> short_data(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS(parse_ppm(short_data), IoError);
  CHECK_THROWS_AS(read_ppm(temp_path("missing.ppm").string()), IoError);

  const Tensor<float> t = to_tensor<float>(img);
  CHECK(t.shape() == Shape{1, 3, 7, 9});
  CHECK(t.at(0, 2, 6, 8) == doctest::Approx(img.at(6, 8, 2) / 255.0));
  CHECK(to_image(t).rgb == img.rgb);
}

}  // namespace
}  // namespace rescomp
