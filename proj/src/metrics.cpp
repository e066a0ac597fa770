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

#include "rescomp/metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace rescomp {
namespace {

constexpr std::array<double, kMsSsimScales> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363,
                                                             0.1333};
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_taps() {
  std::vector<double> taps(kMsSsimWindow);
  double total = 0.0;
  for (int i = 0; i < kMsSsimWindow; ++i) {
    const double d = i - (kMsSsimWindow - 1) / 2.0;
    taps[i] = std::exp(-d * d / (2.0 * kMsSsimSigma * kMsSsimSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

void require_same_size(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("image sizes differ: " + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                "x" + std::to_string(b.height));
  }
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_size(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.rgb.size());
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / m));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

template <typename Real>
Var<Real> ms_ssim(const Var<Real>& x, const Var<Real>& y, double max_value) {
  require_same_shape(x.shape(), y.shape(), "ms_ssim");
  if (x.shape().h < kMsSsimMinSide || x.shape().w < kMsSsimMinSide) {
    throw std::invalid_argument("ms_ssim: images must be at least " +
                                std::to_string(kMsSsimMinSide) + " pixels per side, got " +
                                x.shape().to_string());
  }
  const std::vector<double> taps = gaussian_taps();
  const auto c1 = static_cast<Real>((kK1 * max_value) * (kK1 * max_value));
  const auto c2 = static_cast<Real>((kK2 * max_value) * (kK2 * max_value));
  auto filt = [&](const Var<Real>& v) { return separable_filter_valid(v, taps); };
  Var<Real> a = x, b = y;
  Var<Real> product;
  for (int s = 0; s < kMsSsimScales; ++s) {
    if (s > 0) {
      a = avg_pool2(a);
      b = avg_pool2(b);
    }
    const Var<Real> mu_a = filt(a), mu_b = filt(b);
    const Var<Real> num0 = scale(mul(mu_a, mu_b), Real(2));
    const Var<Real> den0 = add(square(mu_a), square(mu_b));
    const Var<Real> num1 = scale(filt(mul(a, b)), Real(2));
    const Var<Real> den1 = filt(add(square(a), square(b)));
    const Var<Real> cs = div(add_scalar(sub(num1, num0), c2), add_scalar(sub(den1, den0), c2));
    Var<Real> term;
    if (s + 1 < kMsSsimScales) {
      term = mean_spatial(cs);
    } else {
      const Var<Real> luminance = div(add_scalar(num0, c1), add_scalar(den0, c1));
      term = mean_spatial(mul(luminance, cs));
    }
    const Var<Real> factor = pow_scalar(relu(term), static_cast<Real>(kScaleWeights[s]));
    product = product.defined() ? mul(product, factor) : factor;
  }
  return mean(product);
}

double ms_ssim(const Image& a, const Image& b) {
  require_same_size(a, b);
  NoGradGuard no_grad;
  const Var<double> x(to_tensor<double>(a));
  const Var<double> y(to_tensor<double>(b));
  return ms_ssim(x, y, 1.0).value().item();
}

template Var<float> ms_ssim(const Var<float>&, const Var<float>&, double);
template Var<double> ms_ssim(const Var<double>&, const Var<double>&, double);

}  // namespace rescomp
