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

#include "rescomp/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rescomp/entropy.hpp"
#include "rescomp/io_error.hpp"

namespace rescomp {
namespace {

constexpr std::uint32_t kTop = 1u << 24;
// The decoder primes four bytes and the encoder's flush leaves the last
// three implicit zeros.
constexpr std::size_t kImplicitTail = 3;
// Beyond this many standard deviations the Gaussian mass is below the floor.
constexpr double kGaussianWindow = 10.0;

}  // namespace

double FrequencyTable::bits(std::int64_t symbol) const {
  const std::int64_t s = std::clamp(symbol, min_symbol, max_symbol());
  return std::log2(static_cast<double>(kFrequencyTotal)) -
         std::log2(static_cast<double>(freq[static_cast<std::size_t>(s - min_symbol)]));
}

FrequencyTable FrequencyTable::from_pmf(std::span<const double> pmf, std::int64_t min_symbol) {
  FrequencyTable t;
  t.assign_from_pmf(pmf, min_symbol);
  return t;
}

void FrequencyTable::assign_from_pmf(std::span<const double> pmf, std::int64_t min_symbol_in) {
  if (pmf.empty() || pmf.size() > kFrequencyTotal) {
    throw std::invalid_argument("FrequencyTable: alphabet size must be in [1, 65536]");
  }
  min_symbol = min_symbol_in;
  double total = 0.0;
  for (double p : pmf) {
    if (!(p > 0.0)) throw std::invalid_argument("FrequencyTable: probabilities must be positive");
    total += p;
  }
  freq.resize(pmf.size());
  std::int64_t sum = 0;
  std::size_t mode = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const auto f = std::max<std::int64_t>(1, std::llround(pmf[i] / total * kFrequencyTotal));
    freq[i] = static_cast<std::uint32_t>(f);
    sum += f;
    if (freq[i] > freq[mode]) mode = i;
  }
  // Rounding error is at most half a unit per entry; the mode absorbs it
  // unless that would starve it, in which case the excess is spread.
  std::int64_t excess = sum - kFrequencyTotal;
  if (excess < 0 || static_cast<std::int64_t>(freq[mode]) - excess >= 1) {
    freq[mode] = static_cast<std::uint32_t>(freq[mode] - excess);
  } else {
    for (std::size_t i = 0; excess > 0; i = (i + 1) % freq.size()) {
      if (freq[i] > 1) {
        --freq[i];
        --excess;
      }
    }
  }
  cum.resize(freq.size() + 1);
  cum[0] = 0;
  for (std::size_t i = 0; i < freq.size(); ++i) cum[i + 1] = cum[i] + freq[i];
}

void gaussian_frequencies(double mu, double sigma, FrequencyTable& table) {
  thread_local std::vector<double> pmf(static_cast<std::size_t>(kSupportSize));
  const double reach = kGaussianWindow * sigma + 1.0;
  const auto lo = std::max<std::int64_t>(kSupportMin, static_cast<std::int64_t>(std::floor(mu - reach)));
  const auto hi = std::min<std::int64_t>(kSupportMax, static_cast<std::int64_t>(std::ceil(mu + reach)));
  std::fill(pmf.begin(), pmf.end(), kProbFloor);
  for (std::int64_t k = lo; k <= hi; ++k) {
    pmf[static_cast<std::size_t>(k - kSupportMin)] = gaussian_pmf(k, mu, sigma);
  }
  table.assign_from_pmf(pmf, kSupportMin);
}

void RangeEncoder::encode(std::int64_t symbol, const FrequencyTable& table) {
  if (symbol < table.min_symbol || symbol > table.max_symbol()) {
    symbol = std::clamp(symbol, table.min_symbol, table.max_symbol());
    ++clamped_;
  }
  ++symbols_;
  const auto i = static_cast<std::size_t>(symbol - table.min_symbol);
  const std::uint32_t r = range_ >> kFrequencyBits;
  low_ += static_cast<std::uint64_t>(r) * table.cum[i];
  range_ = r * table.freq[i];
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t byte = cache_;
    do {
      const auto value = static_cast<std::uint8_t>(byte + carry);
      if (leading_) {
        leading_ = false;  // always zero
      } else {
        out_.push_back(value);
      }
      byte = 0xFF;
    } while (--pending_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++pending_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (symbols_ == 0) return {};
  // Round low up to the next multiple of 2^24; it stays inside the final
  // interval because range >= 2^24, and its low three bytes are implicit.
  low_ = (low_ + kTop - 1) & ~std::uint64_t{kTop - 1};
  shift_low();
  shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  if (bytes_.empty()) return;
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ < bytes_.size()) return bytes_[pos_++];
  if (pos_ >= bytes_.size() + kImplicitTail) {
    throw CorruptStreamError("range decoder: payload truncated");
  }
  ++pos_;
  return 0;
}

std::int64_t RangeDecoder::decode(const FrequencyTable& table) {
  if (bytes_.empty()) throw CorruptStreamError("range decoder: empty payload");
  const std::uint32_t r = range_ >> kFrequencyBits;
  const std::uint32_t target = code_ / r;
  if (target >= kFrequencyTotal) {
    throw CorruptStreamError("range decoder: code value outside the modeled range");
  }
  const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), target);
  const auto i = static_cast<std::size_t>(it - table.cum.begin() - 1);
  code_ -= r * table.cum[i];
  range_ = r * table.freq[i];
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return table.min_symbol + static_cast<std::int64_t>(i);
}

void RangeDecoder::finish() const {
  if (!bytes_.empty() && pos_ != bytes_.size() + kImplicitTail) {
    throw CorruptStreamError("range decoder: payload length does not match the symbols");
  }
}

}  // namespace rescomp
