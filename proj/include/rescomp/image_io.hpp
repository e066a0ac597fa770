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

// Binary PPM (P6, 8-bit RGB) images and their tensor views.

#ifndef RESCOMP_IMAGE_IO_HPP_
#define RESCOMP_IMAGE_IO_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rescomp/tensor.hpp"

namespace rescomp {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major

  std::uint8_t at(int y, int x, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

// Throws IoError on unreadable files and malformed headers.
Image parse_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> format_ppm(const Image& image);
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& image);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

// (1, 3, H, W) with values in [0, 1].
template <typename Real>
Tensor<Real> to_tensor(const Image& image);
// Clamps to [0, 1] and rounds to 8 bits; reads batch entry n.
template <typename Real>
Image to_image(const Tensor<Real>& x, std::int64_t n = 0);

}  // namespace rescomp

#endif  // RESCOMP_IMAGE_IO_HPP_
