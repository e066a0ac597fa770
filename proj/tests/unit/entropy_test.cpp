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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rescomp/bitstream.hpp"
#include "rescomp/entropy.hpp"
#include "rescomp/io_error.hpp"
#include "rescomp/optim.hpp"
#include "rescomp/range_coder.hpp"
#include "support/gradcheck.hpp"

namespace rescomp {
namespace {

using testing::gradient_error;
using testing::random_tensor;

TEST_CASE("eval quantization rounds half to even") {
  std::mt19937_64 rng(1);
  const Tensor<double> x(Shape{1, 1, 1, 6}, std::vector<double>{2.4, -1.5, 0.5, 1.5, 2.5, -0.6});
  const Var<double> q = quantize(constant(x), QuantMode::kEval, rng);
  const std::vector<double> want = {2, -2, 0, 2, 2, -1};
  for (int i = 0; i < 6; ++i) CHECK(q.value()[i] == want[i]);
}

TEST_CASE("train quantization adds bounded zero-mean noise with identity gradient") {
  std::mt19937_64 rng(2);
  Var<double> x = Var<double>::parameter(Tensor<double>(Shape{1, 1, 1000, 1000}, 0.25));
  const Var<double> q = quantize(x, QuantMode::kTrain, rng);
  double mean = 0.0;
  for (std::int64_t i = 0; i < x.value().numel(); ++i) {
    const double d = q.value()[i] - x.value()[i];
    CHECK_UNARY(d >= -0.5 && d < 0.5);
    mean += d;
  }
  mean /= static_cast<double>(x.value().numel());
  CHECK(std::abs(mean) < 3e-3);
  backward(sum(q));
  for (double g : x.grad().data()) REQUIRE(g == 1.0);
}

TEST_CASE("quantize around an offset") {
  const Tensor<float> x(Shape{1, 2, 1, 2}, std::vector<float>{0.9f, 1.2f, -3.4f, -2.6f});
  const Tensor<float> m(Shape{1, 2, 1, 1}, std::vector<float>{0.25f, -0.5f});
  const Tensor<float> q = quantize_around(x, m);
  CHECK(q[0] == doctest::Approx(1.25));
  CHECK(q[1] == doctest::Approx(1.25));
  CHECK(q[2] == doctest::Approx(-3.5));
  CHECK(q[3] == doctest::Approx(-2.5));
}

TEST_CASE("gaussian pmf") {
  CHECK(gaussian_pmf(0, 0.0, 1.0) == doctest::Approx(std::erf(0.5 / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(std::abs(gaussian_pmf(0, 0.0, 1.0) - 0.38292) < 1e-5);
  for (double sigma : {0.3, 1.0, 7.5, 40.0}) {
    double total = 0.0;
    for (int k = -1000; k <= 1000; ++k) total += gaussian_pmf(k, 0.7, sigma, 0.0);
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
  for (int k = 0; k < 20; ++k) CHECK(gaussian_pmf(k, 0.0, 3.0) == gaussian_pmf(-k, 0.0, 3.0));
  CHECK(gaussian_pmf(400, 0.0, 1.0) == kProbFloor);
  CHECK(normal_cdf(0.0) == 0.5);
}

TEST_CASE("rate of symbols at probability one half") {
  const Var<double> p(Tensor<double>(Shape{1, 2, 3, 4}, 0.5));
  CHECK(total_bits(p).value().item() == doctest::Approx(24.0));
}

TEST_CASE("degenerate scales approach the floor bound") {
  std::mt19937_64 rng(3);
  const Tensor<double> mu = random_tensor({1, 4, 4, 4}, rng, -5.0, 5.0);
  const Tensor<double> sigma(mu.shape(), kSigmaMin);
  Tensor<double> centred = mu, far = mu;
  for (auto& v : centred.data()) v = std::nearbyint(v);
  for (auto& v : far.data()) v = std::nearbyint(v) + 3.0;
  // Probability of the mean's own bin is near one unless the mean sits on a
  // bin edge; a far symbol costs the floor.
  const double far_bits = gaussian_information_bits(far, mu, sigma);
  CHECK(far_bits == doctest::Approx(64 * 16.0).epsilon(1e-3));
  CHECK(gaussian_information_bits(centred, mu, sigma) < 64 * 0.01);
  const Var<double> lik = gaussian_likelihood(constant(far), constant(mu), constant(sigma));
  for (double p : lik.value().data()) CHECK(p < 1e-12);
}

TEST_CASE("train-mode rate is differentiable in mean and scale") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor<double> y = random_tensor({1, 3, 3, 3}, rng, -4.0, 4.0);
    Var<double> mu = Var<double>::parameter(random_tensor(y.shape(), rng, -3.0, 3.0));
    Var<double> sigma = Var<double>::parameter(random_tensor(y.shape(), rng, 0.3, 5.0));
    const auto rate = [&] {
      return total_bits(lower_bound(gaussian_likelihood(constant(y), mu, sigma), 1e-9));
    };
    CHECK(gradient_error({mu, sigma}, rate, rng) < 1e-3);
  }
}

TEST_CASE("factorized prior") {
  std::mt19937_64 rng(4);
  FactorizedPrior<double> prior(5, rng);
  std::vector<NamedParameter<double>> params;
  prior.collect_parameters("", params);
  std::int64_t count = 0;
  for (const auto& p : params) count += p.var.value().numel();
  CHECK(count == 46 * 5);

  // Monotone CDF and floored pmf.
  Tensor<double> grid(Shape{1, 5, 1, 301});
  for (int c = 0; c < 5; ++c) {
    for (int i = 0; i < 301; ++i) grid.at(0, c, 0, i) = -150.0 + i;
  }
  const Var<double> logits = prior.cumulative_logits(constant(grid));
  for (int c = 0; c < 5; ++c) {
    for (int i = 1; i < 301; ++i) CHECK(logits.value().at(0, c, 0, i) >= logits.value().at(0, c, 0, i - 1));
    const std::vector<double> pmf = prior.channel_pmf(c);
    CHECK(pmf.size() == static_cast<std::size_t>(kSupportSize));
    for (double p : pmf) CHECK(p >= kProbFloor);
  }

  // Likelihood gradient with respect to inputs and density parameters.
  Var<double> x = Var<double>::parameter(random_tensor({1, 5, 2, 2}, rng, -3.0, 3.0));
  std::vector<Var<double>> inputs = prior.density_parameters();
  inputs.push_back(x);
  CHECK(gradient_error(inputs, [&] { return total_bits(prior.likelihood(x)); }, rng) < 1e-4);
}

TEST_CASE("auxiliary loss moves the quantiles to the tails and median") {
  std::mt19937_64 rng(5);
  FactorizedPrior<float> prior(3, rng);
  Adam<float> aux({prior.quantiles()}, AdamOptions{0.1});
  const float before = prior.aux_loss().value().item();
  for (int i = 0; i < 4000; ++i) {
    aux.zero_grad();
    backward(prior.aux_loss());
    aux.step();
  }
  CHECK(prior.aux_loss().value().item() < 1e-3f * before);
  const Tensor<float> q = prior.quantiles().value();
  const Var<float> l = prior.cumulative_logits(Var<float>(q));
  for (int c = 0; c < 3; ++c) {
    CHECK(q.at(0, c, 0, 0) < q.at(0, c, 0, 1));
    CHECK(q.at(0, c, 0, 1) < q.at(0, c, 0, 2));
    CHECK(std::abs(l.value().at(0, c, 0, 1)) < 0.05f);
  }
  CHECK(prior.medians().shape() == Shape{1, 3, 1, 1});
}

TEST_CASE("frequency tables") {
  const std::vector<double> pmf = {0.5, 0.25, 0.125, 0.125};
  const FrequencyTable t = FrequencyTable::from_pmf(pmf, -1);
  CHECK(t.min_symbol == -1);
  CHECK(t.max_symbol() == 2);
  CHECK(t.cum.back() == kFrequencyTotal);
  CHECK(t.bits(-1) == doctest::Approx(1.0));
  CHECK(t.bits(2) == doctest::Approx(3.0));

  FrequencyTable g;
  for (double sigma : {kSigmaMin, 0.01, 1.0, 64.0, 1000.0}) {
    gaussian_frequencies(3.3, sigma, g);
    CHECK(g.min_symbol == kSupportMin);
    CHECK(g.freq.size() == static_cast<std::size_t>(kSupportSize));
    CHECK(g.cum.back() == kFrequencyTotal);
    for (std::uint32_t f : g.freq) CHECK(f >= 1);
  }
}

TEST_CASE("range coder edge cases") {
  const std::vector<double> certain = {1.0};
  const FrequencyTable one = FrequencyTable::from_pmf(certain, 0);
  RangeEncoder enc;
  enc.encode(0, one);
  const std::vector<std::uint8_t> bytes = enc.finish();
  CHECK(bytes.size() <= 2);
  RangeDecoder dec(bytes);
  CHECK(dec.decode(one) == 0);
  CHECK_NOTHROW(dec.finish());

  RangeEncoder empty;
  CHECK(empty.finish().empty());
  RangeDecoder nothing(std::span<const std::uint8_t>{});
  CHECK_NOTHROW(nothing.finish());

  const std::vector<double> pmf = {0.25, 0.5, 0.25};
  const FrequencyTable t = FrequencyTable::from_pmf(pmf, -1);
  RangeEncoder clamping;
  clamping.encode(7, t);
  clamping.encode(-9, t);
  clamping.encode(0, t);
  CHECK(clamping.clamped() == 2);
  const std::vector<std::uint8_t> c = clamping.finish();
  RangeDecoder back(c);
  CHECK(back.decode(t) == 1);
  CHECK(back.decode(t) == -1);
  CHECK(back.decode(t) == 0);
}

TEST_CASE("range coder round trips random symbols near the information content") {
  std::mt19937_64 rng(6);
  std::vector<double> pmf(kSupportSize);
  for (std::int64_t s = 0; s < kSupportSize; ++s) pmf[s] = gaussian_pmf(s + kSupportMin, 0.0, 4.0);
  const FrequencyTable t = FrequencyTable::from_pmf(pmf, kSupportMin);
  std::discrete_distribution<int> draw(pmf.begin(), pmf.end());
  std::vector<std::int64_t> symbols(10000);
  RangeEncoder enc;
  double info = 0.0;
  for (auto& s : symbols) {
    s = draw(rng) + kSupportMin;
    info += t.bits(s);
    enc.encode(s, t);
  }
  const std::vector<std::uint8_t> bytes = enc.finish();
  const double coded = 8.0 * static_cast<double>(bytes.size());
  CHECK(coded >= info - 1.0);
  CHECK(coded <= info * 1.01 + 64.0);
  RangeDecoder dec(bytes);
  for (std::int64_t s : symbols) REQUIRE(dec.decode(t) == s);
  CHECK_NOTHROW(dec.finish());
}

TEST_CASE("range decoder rejects corrupted payloads") {
  std::mt19937_64 rng(7);
  const std::vector<double> pmf = {0.1, 0.2, 0.4, 0.2, 0.1};
  const FrequencyTable t = FrequencyTable::from_pmf(pmf, -2);
  std::uniform_int_distribution<int> sym(-2, 2);
  RangeEncoder enc;
  for (int i = 0; i < 500; ++i) enc.encode(sym(rng), t);
  std::vector<std::uint8_t> bytes = enc.finish();
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
  const auto decode_all = [&](std::span<const std::uint8_t> b) {
    RangeDecoder dec(b);
    for (int i = 0; i < 500; ++i) dec.decode(t);
    dec.finish();
  };
  CHECK_NOTHROW(decode_all(bytes));
  CHECK_THROWS_AS(decode_all(truncated), CorruptStreamError);
  std::vector<std::uint8_t> longer = bytes;
  longer.push_back(0x5a);
  CHECK_THROWS_AS(decode_all(longer), CorruptStreamError);
}

TEST_CASE("gaussian latents round trip and match their estimate") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape shape{1, 1 + trial % 6, 1 + trial % 5, 2 + trial % 7};
    Tensor<float> mu(shape), sigma(shape), y(shape);
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      mu[i] = static_cast<float>(std::uniform_real_distribution<double>(-30, 30)(rng));
      sigma[i] = static_cast<float>(std::exp(std::uniform_real_distribution<double>(
          std::log(kSigmaMin), std::log(64.0))(rng)));
      y[i] = static_cast<float>(std::clamp<double>(std::nearbyint(mu[i] + sigma[i] * normal(rng)),
                                                   kSupportMin, kSupportMax));
    }
    CodingStats stats;
    const std::vector<std::uint8_t> bytes = encode_gaussian(y, mu, sigma, &stats);
    CHECK(stats.clamped == 0);
    CHECK(stats.information_bits == doctest::Approx(gaussian_information_bits(y, mu, sigma)));
    const double coded = 8.0 * static_cast<double>(bytes.size());
    CHECK(coded >= stats.information_bits - 1.0);
    CHECK(coded <= stats.information_bits * 1.01 + 64.0);
    const Tensor<float> back = decode_gaussian(bytes, mu, sigma);
    for (std::int64_t i = 0; i < y.numel(); ++i) REQUIRE(back[i] == y[i]);
  }
}

TEST_CASE("factorized latents round trip") {
  std::mt19937_64 rng(9);
  FactorizedPrior<float> prior(4, rng);
  const std::vector<FrequencyTable> tables = prior_tables(prior);
  const Tensor<float> medians = prior.medians();
  Tensor<float> z(Shape{2, 4, 3, 5});
  std::normal_distribution<float> normal(0.0f, 3.0f);
  for (auto& v : z.data()) v = normal(rng);
  const Tensor<float> z_hat = quantize_around(z, medians);
  CodingStats stats;
  const std::vector<std::uint8_t> bytes = encode_factorized(z_hat, medians, tables, &stats);
  CHECK(stats.symbols == z.numel());
  CHECK(stats.information_bits == doctest::Approx(factorized_information_bits(z_hat, medians, tables)));
  const Tensor<float> back = decode_factorized(bytes, z.shape(), medians, tables);
  for (std::int64_t i = 0; i < z.numel(); ++i) CHECK(back[i] == doctest::Approx(z_hat[i]));
}

}  // namespace
}  // namespace rescomp
