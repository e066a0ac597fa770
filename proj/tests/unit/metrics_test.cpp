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

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "rescomp/metrics.hpp"
#include "support/pattern.hpp"

namespace rescomp {
namespace {

Image constant_image(int h, int w, std::uint8_t v) {
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.assign(static_cast<std::size_t>(h) * w * 3, v);
  return img;
}

TEST_CASE("psnr closed forms") {
  CHECK(psnr_from_mse(0.0) == kPsnrCap);
  CHECK(psnr_from_mse(1.0) == doctest::Approx(48.1308).epsilon(1e-5));
  CHECK(psnr_from_mse(255.0 * 255.0) == doctest::Approx(0.0));
  const Image a = constant_image(4, 4, 10), b = constant_image(4, 4, 11);
  CHECK(mse(a, b) == 1.0);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(a, b) == doctest::Approx(48.1308).epsilon(1e-5));
  CHECK_THROWS_AS(psnr(a, constant_image(4, 5, 10)), std::invalid_argument);
}

TEST_CASE("ms-ssim identity, constants and size limit") {
  testing::Lcg g(11);
  const Image ref = testing::pattern_image(180, 190, g);
  CHECK(ms_ssim(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));
  const double gray = ms_ssim(ref, constant_image(180, 190, 128));
  CHECK(gray < 1.0);
  CHECK(gray >= 0.0);
  CHECK_THROWS_AS(ms_ssim(constant_image(175, 300, 1), constant_image(175, 300, 1)),
                  std::invalid_argument);
}

// Reference values from TensorFlow's tf.image.ssim_multiscale in float64
// (tests/data/ms_ssim_oracle.py).
TEST_CASE("ms-ssim matches the reference implementation") {
  struct Case { int h, w; std::uint64_t seed; int shift; double expected; };
  const Case cases[] = {
      {256, 256, 1, 4, 0.98280334},
      {192, 200, 2, 6, 0.99845290},
      {181, 203, 3, 3, 0.93761832},
      {176, 176, 4, -1, 0.04670217},
  };
  for (const Case& c : cases) {
    testing::Lcg g(c.seed);
    const Image ref = testing::pattern_image(c.h, c.w, g);
    const Image other = c.shift >= 0 ? testing::noisy_image(ref, c.shift, g)
                                     : constant_image(c.h, c.w, 128);
    CAPTURE(c.h);
    CHECK(std::abs(ms_ssim(ref, other) - c.expected) < 1e-4);
  }
}

TEST_CASE("differentiable ms-ssim agrees with the image version") {
  testing::Lcg g(12);
  const Image a = testing::pattern_image(176, 180, g);
  const Image b = testing::noisy_image(a, 4, g);
  const Var<double> v = ms_ssim(Var<double>(to_tensor<double>(a)), Var<double>(to_tensor<double>(b)), 1.0);
  CHECK(v.value().item() == doctest::Approx(ms_ssim(a, b)).epsilon(1e-9));
  const Var<float> f = ms_ssim(Var<float>(to_tensor<float>(a)), Var<float>(to_tensor<float>(b)), 1.0);
  CHECK(f.value().item() == doctest::Approx(ms_ssim(a, b)).epsilon(1e-4));
}

}  // namespace
}  // namespace rescomp
