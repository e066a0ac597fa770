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

// Image quality metrics.

#ifndef RESCOMP_METRICS_HPP_
#define RESCOMP_METRICS_HPP_

#include "rescomp/image_io.hpp"
#include "rescomp/ops.hpp"

namespace rescomp {

inline constexpr double kPsnrCap = 99.0;
inline constexpr int kMsSsimScales = 5;
inline constexpr int kMsSsimWindow = 11;
inline constexpr double kMsSsimSigma = 1.5;
// Smallest side that survives four 2x reductions with an 11-tap window.
inline constexpr int kMsSsimMinSide = 176;

double mse(const Image& a, const Image& b);
// 10 log10(255^2 / MSE); identical images give kPsnrCap.
double psnr_from_mse(double mse);
double psnr(const Image& a, const Image& b);

// Five-scale MS-SSIM with an 11-tap Gaussian window (sigma 1.5), VALID
// filtering and 2x2 average pooling between scales; the product over scales
// is taken per channel and then averaged. Differentiable; mean over batch
// and channels. Values are in [0, max_value].
template <typename Real>
Var<Real> ms_ssim(const Var<Real>& x, const Var<Real>& y, double max_value);

// Throws std::invalid_argument below kMsSsimMinSide.
double ms_ssim(const Image& a, const Image& b);

}  // namespace rescomp

#endif  // RESCOMP_METRICS_HPP_
