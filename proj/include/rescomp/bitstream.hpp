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

// Entropy coding of quantized latents and the container format.
//
// File layout (little-endian):
//   magic "RSCP" | version u8 | flags u8 | width u16 | height u16 |
//   z_len u32 | z payload | y payload
// Flag bit 0 selects between two rate-controlled models; other bits are
// reserved and must be zero.

#ifndef RESCOMP_BITSTREAM_HPP_
#define RESCOMP_BITSTREAM_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rescomp/entropy.hpp"
#include "rescomp/range_coder.hpp"

namespace rescomp {

inline constexpr std::array<std::uint8_t, 4> kBitstreamMagic = {'R', 'S', 'C', 'P'};
inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::size_t kBitstreamHeaderBytes = 14;

struct Bitstream {
  bool model_flag = false;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::uint8_t> z_bytes;
  std::vector<std::uint8_t> y_bytes;
};

std::vector<std::uint8_t> serialize(const Bitstream& stream);
// Throws CorruptStreamError on bad magic, version, reserved flags or
// lengths.
Bitstream deserialize(std::span<const std::uint8_t> bytes);

struct CodingStats {
  std::int64_t symbols = 0;
  std::int64_t clamped = 0;
  double information_bits = 0.0;  // sum of -log2 of the coded frequencies
};

// Latents rounded to integers, coded under per-element Gaussians.
template <typename Real>
std::vector<std::uint8_t> encode_gaussian(const Tensor<Real>& y_hat, const Tensor<Real>& mu,
                                          const Tensor<Real>& sigma, CodingStats* stats = nullptr);
template <typename Real>
Tensor<Real> decode_gaussian(std::span<const std::uint8_t> bytes, const Tensor<Real>& mu,
                             const Tensor<Real>& sigma);
// Information content without running the coder.
template <typename Real>
double gaussian_information_bits(const Tensor<Real>& y_hat, const Tensor<Real>& mu,
                                 const Tensor<Real>& sigma);

// One frequency table per channel of a factorized prior, over symbols
// round(x - median).
template <typename Real>
std::vector<FrequencyTable> prior_tables(const FactorizedPrior<Real>& prior);

template <typename Real>
std::vector<std::uint8_t> encode_factorized(const Tensor<Real>& x_hat, const Tensor<Real>& medians,
                                            const std::vector<FrequencyTable>& tables,
                                            CodingStats* stats = nullptr);
template <typename Real>
Tensor<Real> decode_factorized(std::span<const std::uint8_t> bytes, Shape shape,
                               const Tensor<Real>& medians,
                               const std::vector<FrequencyTable>& tables);
template <typename Real>
double factorized_information_bits(const Tensor<Real>& x_hat, const Tensor<Real>& medians,
                                   const std::vector<FrequencyTable>& tables);

}  // namespace rescomp

#endif  // RESCOMP_BITSTREAM_HPP_
