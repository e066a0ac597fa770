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

#include "rescomp/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "rescomp/io_error.hpp"

namespace rescomp {
namespace {

// Reads the next whitespace-delimited header token, skipping comments.
std::string header_token(std::span<const std::uint8_t> b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') tok += static_cast<char>(b[pos++]);
  return tok;
}

int header_int(std::span<const std::uint8_t> b, std::size_t& pos, const char* what) {
  const std::string tok = header_token(b, pos);
  if (tok.empty() || tok.size() > 6 ||
      !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw IoError(std::string("ppm: bad ") + what + " '" + tok + "'");
  }
  return std::stoi(tok);
}

}  // namespace

Image parse_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  if (header_token(bytes, pos) != "P6") throw IoError("ppm: only binary P6 files are supported");
  Image img;
  img.width = header_int(bytes, pos, "width");
  img.height = header_int(bytes, pos, "height");
  const int maxval = header_int(bytes, pos, "maxval");
  if (maxval != 255) throw IoError("ppm: maxval must be 255, got " + std::to_string(maxval));
  if (img.width <= 0 || img.height <= 0) throw IoError("ppm: empty image");
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  if (pos > bytes.size() || bytes.size() - pos < need) {
    throw IoError("ppm: raster truncated");
  }
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                 bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

std::vector<std::uint8_t> format_ppm(const Image& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

Image read_ppm(const std::string& path) {
  try {
    return parse_ppm(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_ppm(const std::string& path, const Image& image) {
  write_file(path, format_ppm(image));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

template <typename Real>
Tensor<Real> to_tensor(const Image& image) {
  Tensor<Real> x(Shape{1, 3, image.height, image.width});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int col = 0; col < image.width; ++col) {
        x.at(0, c, y, col) = static_cast<Real>(image.at(y, col, c) / 255.0);
      }
    }
  }
  return x;
}

template <typename Real>
Image to_image(const Tensor<Real>& x, std::int64_t n) {
  const Shape s = x.shape();
  if (s.c != 3) throw std::invalid_argument("to_image: expected 3 channels, got " + s.to_string());
  Image img;
  img.width = static_cast<int>(s.w);
  img.height = static_cast<int>(s.h);
  img.rgb.resize(static_cast<std::size_t>(s.h * s.w * 3));
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int col = 0; col < img.width; ++col) {
        const double v = std::clamp(static_cast<double>(x.at(n, c, y, col)), 0.0, 1.0);
        img.rgb[(static_cast<std::size_t>(y) * img.width + col) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

template Tensor<float> to_tensor(const Image&);
template Tensor<double> to_tensor(const Image&);
template Image to_image(const Tensor<float>&, std::int64_t);
template Image to_image(const Tensor<double>&, std::int64_t);

}  // namespace rescomp
