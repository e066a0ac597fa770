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

// Model checkpoints and whole-image compression.
//
// Checkpoint layout (little-endian):
//   magic "RCKP" | version u32 | config_len u32 | config text |
//   step u64 | count u32 | count x (name_len u32 | name | n c h w u32 |
//   float32 values)

#ifndef RESCOMP_CODEC_HPP_
#define RESCOMP_CODEC_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rescomp/bitstream.hpp"
#include "rescomp/image_io.hpp"
#include "rescomp/network.hpp"

namespace rescomp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> checkpoint_bytes(const CompressionModel<float>& model,
                                           std::uint64_t step = 0);
// Throws CorruptStreamError on malformed content.
CompressionModel<float> model_from_checkpoint(std::span<const std::uint8_t> bytes,
                                              std::uint64_t* step = nullptr);
void save_checkpoint(const std::string& path, const CompressionModel<float>& model,
                     std::uint64_t step = 0);
CompressionModel<float> load_checkpoint(const std::string& path, std::uint64_t* step = nullptr);

struct Compressed {
  std::vector<std::uint8_t> file;
  CodingStats stats;

  // 8 * file bytes per pixel.
  double bpp(int width, int height) const {
    return 8.0 * static_cast<double>(file.size()) / (static_cast<double>(width) * height);
  }
};

Compressed compress(const CompressionModel<float>& model, const Image& image, bool model_flag);

struct Decompressed {
  Image image;
  bool model_flag = false;
};

// Uses only the bitstream and the model.
Decompressed decompress(const CompressionModel<float>& model, std::span<const std::uint8_t> file);

}  // namespace rescomp

#endif  // RESCOMP_CODEC_HPP_
