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

#include "rescomp/bitstream.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rescomp/io_error.hpp"

namespace rescomp {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le(std::span<const std::uint8_t> b, std::size_t pos, int bytes) {
  std::uint32_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[pos + static_cast<std::size_t>(i)];
  return v;
}

template <typename Real>
std::int64_t symbol_of(Real v, Real offset) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(v) - offset));
}

}  // namespace

std::vector<std::uint8_t> serialize(const Bitstream& s) {
  if (s.z_bytes.size() > 0xFFFFFFFFu) throw std::invalid_argument("serialize: z payload too large");
  std::vector<std::uint8_t> out(kBitstreamMagic.begin(), kBitstreamMagic.end());
  out.push_back(kBitstreamVersion);
  out.push_back(s.model_flag ? 1 : 0);
  put_u16(out, s.width);
  put_u16(out, s.height);
  put_u32(out, static_cast<std::uint32_t>(s.z_bytes.size()));
  out.insert(out.end(), s.z_bytes.begin(), s.z_bytes.end());
  out.insert(out.end(), s.y_bytes.begin(), s.y_bytes.end());
  return out;
}

Bitstream deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kBitstreamHeaderBytes) {
    throw CorruptStreamError("bitstream: " + std::to_string(bytes.size()) +
                             " bytes is shorter than the header");
  }
  if (!std::equal(kBitstreamMagic.begin(), kBitstreamMagic.end(), bytes.begin())) {
    throw CorruptStreamError("bitstream: bad magic");
  }
  if (bytes[4] != kBitstreamVersion) {
    throw CorruptStreamError("bitstream: unsupported version " + std::to_string(bytes[4]));
  }
  if ((bytes[5] & ~1u) != 0) throw CorruptStreamError("bitstream: reserved flag bits set");
  Bitstream s;
  s.model_flag = (bytes[5] & 1u) != 0;
  s.width = static_cast<std::uint16_t>(get_le(bytes, 6, 2));
  s.height = static_cast<std::uint16_t>(get_le(bytes, 8, 2));
  const std::uint32_t z_len = get_le(bytes, 10, 4);
  if (s.width == 0 || s.height == 0) throw CorruptStreamError("bitstream: zero image size");
  if (z_len > bytes.size() - kBitstreamHeaderBytes) {
    throw CorruptStreamError("bitstream: z length exceeds the file");
  }
  const auto z_begin = bytes.begin() + kBitstreamHeaderBytes;
  s.z_bytes.assign(z_begin, z_begin + z_len);
  s.y_bytes.assign(z_begin + z_len, bytes.end());
  return s;
}

template <typename Real>
std::vector<std::uint8_t> encode_gaussian(const Tensor<Real>& y_hat, const Tensor<Real>& mu,
                                          const Tensor<Real>& sigma, CodingStats* stats) {
  require_same_shape(y_hat.shape(), mu.shape(), "encode_gaussian(y_hat, mu)");
  require_same_shape(y_hat.shape(), sigma.shape(), "encode_gaussian(y_hat, sigma)");
  RangeEncoder enc;
  FrequencyTable table;
  double info = 0.0;
  for (std::int64_t i = 0; i < y_hat.numel(); ++i) {
    gaussian_frequencies(mu[i], sigma[i], table);
    const std::int64_t s = symbol_of(y_hat[i], Real(0));
    info += table.bits(s);
    enc.encode(s, table);
  }
  if (stats) {
    stats->symbols += enc.symbols();
    stats->clamped += enc.clamped();
    stats->information_bits += info;
  }
  return enc.finish();
}

template <typename Real>
Tensor<Real> decode_gaussian(std::span<const std::uint8_t> bytes, const Tensor<Real>& mu,
                             const Tensor<Real>& sigma) {
  require_same_shape(mu.shape(), sigma.shape(), "decode_gaussian(mu, sigma)");
  Tensor<Real> out(mu.shape());
  RangeDecoder dec(bytes);
  FrequencyTable table;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    gaussian_frequencies(mu[i], sigma[i], table);
    out[i] = static_cast<Real>(dec.decode(table));
  }
  dec.finish();
  return out;
}

template <typename Real>
double gaussian_information_bits(const Tensor<Real>& y_hat, const Tensor<Real>& mu,
                                 const Tensor<Real>& sigma) {
  require_same_shape(y_hat.shape(), mu.shape(), "gaussian_information_bits");
  FrequencyTable table;
  double info = 0.0;
  for (std::int64_t i = 0; i < y_hat.numel(); ++i) {
    gaussian_frequencies(mu[i], sigma[i], table);
    info += table.bits(symbol_of(y_hat[i], Real(0)));
  }
  return info;
}

template <typename Real>
std::vector<FrequencyTable> prior_tables(const FactorizedPrior<Real>& prior) {
  std::vector<FrequencyTable> tables;
  tables.reserve(static_cast<std::size_t>(prior.channels()));
  for (std::int64_t c = 0; c < prior.channels(); ++c) {
    tables.push_back(FrequencyTable::from_pmf(prior.channel_pmf(c), kSupportMin));
  }
  return tables;
}

template <typename Real>
std::vector<std::uint8_t> encode_factorized(const Tensor<Real>& x_hat, const Tensor<Real>& medians,
                                            const std::vector<FrequencyTable>& tables,
                                            CodingStats* stats) {
  const Shape s = x_hat.shape();
  if (static_cast<std::int64_t>(tables.size()) != s.c || medians.numel() != s.c) {
    throw std::invalid_argument("encode_factorized: " + std::to_string(tables.size()) +
                                " tables for input " + s.to_string());
  }
  RangeEncoder enc;
  double info = 0.0;
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const FrequencyTable& t = tables[static_cast<std::size_t>(c)];
      const Real* p = x_hat.plane(n, c);
      for (std::int64_t i = 0; i < s.plane(); ++i) {
        const std::int64_t sym = symbol_of(p[i], medians[c]);
        info += t.bits(sym);
        enc.encode(sym, t);
      }
    }
  }
  if (stats) {
    stats->symbols += enc.symbols();
    stats->clamped += enc.clamped();
    stats->information_bits += info;
  }
  return enc.finish();
}

template <typename Real>
Tensor<Real> decode_factorized(std::span<const std::uint8_t> bytes, Shape shape,
                               const Tensor<Real>& medians,
                               const std::vector<FrequencyTable>& tables) {
  if (static_cast<std::int64_t>(tables.size()) != shape.c || medians.numel() != shape.c) {
    throw std::invalid_argument("decode_factorized: tables do not match " + shape.to_string());
  }
  Tensor<Real> out(shape);
  RangeDecoder dec(bytes);
  for (std::int64_t n = 0; n < shape.n; ++n) {
    for (std::int64_t c = 0; c < shape.c; ++c) {
      const FrequencyTable& t = tables[static_cast<std::size_t>(c)];
      Real* p = out.plane(n, c);
      for (std::int64_t i = 0; i < shape.plane(); ++i) {
        p[i] = static_cast<Real>(dec.decode(t)) + medians[c];
      }
    }
  }
  dec.finish();
  return out;
}

template <typename Real>
double factorized_information_bits(const Tensor<Real>& x_hat, const Tensor<Real>& medians,
                                   const std::vector<FrequencyTable>& tables) {
  const Shape s = x_hat.shape();
  double info = 0.0;
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const Real* p = x_hat.plane(n, c);
      for (std::int64_t i = 0; i < s.plane(); ++i) {
        info += tables[static_cast<std::size_t>(c)].bits(symbol_of(p[i], medians[c]));
      }
    }
  }
  return info;
}

#define RESCOMP_INSTANTIATE_BITSTREAM(Real)                                                    \
  template std::vector<std::uint8_t> encode_gaussian(const Tensor<Real>&, const Tensor<Real>&, \
                                                     const Tensor<Real>&, CodingStats*);       \
  template Tensor<Real> decode_gaussian(std::span<const std::uint8_t>, const Tensor<Real>&,    \
                                        const Tensor<Real>&);                                  \
  template double gaussian_information_bits(const Tensor<Real>&, const Tensor<Real>&,          \
                                            const Tensor<Real>&);                              \
  template std::vector<FrequencyTable> prior_tables(const FactorizedPrior<Real>&);             \
  template std::vector<std::uint8_t> encode_factorized(                                        \
      const Tensor<Real>&, const Tensor<Real>&, const std::vector<FrequencyTable>&,            \
      CodingStats*);                                                                           \
  template Tensor<Real> decode_factorized(std::span<const std::uint8_t>, Shape,                \
                                          const Tensor<Real>&,                                 \
                                          const std::vector<FrequencyTable>&);                 \
  template double factorized_information_bits(const Tensor<Real>&, const Tensor<Real>&,        \
                                              const std::vector<FrequencyTable>&);

RESCOMP_INSTANTIATE_BITSTREAM(float)
RESCOMP_INSTANTIATE_BITSTREAM(double)

}  // namespace rescomp
