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

// Byte-oriented range coder over 16-bit frequency tables.

#ifndef RESCOMP_RANGE_CODER_HPP_
#define RESCOMP_RANGE_CODER_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace rescomp {

inline constexpr int kFrequencyBits = 16;
inline constexpr std::uint32_t kFrequencyTotal = 1u << kFrequencyBits;

// Symbol frequencies summing to kFrequencyTotal, every entry at least one.
struct FrequencyTable {
  std::int64_t min_symbol = 0;
  std::vector<std::uint32_t> freq;
  std::vector<std::uint32_t> cum;  // freq.size() + 1 entries

  std::int64_t max_symbol() const {
    return min_symbol + static_cast<std::int64_t>(freq.size()) - 1;
  }
  // Information content of a symbol under the table, in bits.
  double bits(std::int64_t symbol) const;

  // Normalizes a positive pmf and rounds it to frequencies, fixing the sum
  // on the most probable entry.
  static FrequencyTable from_pmf(std::span<const double> pmf, std::int64_t min_symbol);
  void assign_from_pmf(std::span<const double> pmf, std::int64_t min_symbol);
};

// Floored Gaussian over [kSupportMin, kSupportMax], quantized. Reuses the
// storage of table.
void gaussian_frequencies(double mu, double sigma, FrequencyTable& table);

class RangeEncoder {
 public:
  // Symbols outside the table are clamped to its edges and counted.
  void encode(std::int64_t symbol, const FrequencyTable& table);
  // Terminates the stream. An encoder that saw no symbols yields no bytes.
  std::vector<std::uint8_t> finish();
  std::int64_t clamped() const { return clamped_; }
  std::int64_t symbols() const { return symbols_; }

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 1;
  bool leading_ = true;
  std::vector<std::uint8_t> out_;
  std::int64_t clamped_ = 0;
  std::int64_t symbols_ = 0;
};

// Throws CorruptStreamError when the payload cannot have come from the
// encoder with the same tables.
class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);
  std::int64_t decode(const FrequencyTable& table);
  // Checks that the payload was consumed exactly.
  void finish() const;

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace rescomp

#endif  // RESCOMP_RANGE_CODER_HPP_
