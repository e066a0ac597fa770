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

// Two-model rate control: every image is encoded with a low-rate and a
// high-rate model and one of the two is kept per image so that the mean rate
// meets a budget.

#ifndef RESCOMP_RATECONTROL_HPP_
#define RESCOMP_RATECONTROL_HPP_

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rescomp {

struct CandidateEncoding {
  double rate = 0.0;     // bpp
  double quality = 0.0;  // MS-SSIM
};

struct ImageCandidates {
  std::string image;
  std::array<CandidateEncoding, 2> options;  // [0] low model, [1] high model
};

struct Selection {
  std::vector<int> choice;  // model flag per image
  double mean_rate = 0.0;
  double mean_quality = 0.0;
  bool feasible = true;
};

// Starts from each image's cheaper candidate and applies upgrades in order of
// decreasing quality gain per extra bit, skipping any that would exceed the
// budget. When even the cheapest assignment is over budget, returns every
// image on the low model with feasible = false.
Selection select_models(std::span<const ImageCandidates> images, double budget_bpp);

// Optimal assignment by enumeration; n <= 24.
Selection select_exhaustive(std::span<const ImageCandidates> images, double budget_bpp);

// Parses "image,model,bpp,psnr,ms_ssim" rows (model is low/high or 0/1);
// each image needs exactly one row per model. Throws std::invalid_argument
// naming the offending line.
std::vector<ImageCandidates> parse_stats_csv(std::istream& in);

// image,model,bpp,ms_ssim,cumulative_mean_bpp
void write_selection_csv(std::ostream& out, std::span<const ImageCandidates> images,
                         const Selection& selection);

}  // namespace rescomp

#endif  // RESCOMP_RATECONTROL_HPP_
