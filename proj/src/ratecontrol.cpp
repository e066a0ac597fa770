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

#include "rescomp/ratecontrol.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rescomp {
namespace {

// Relative slack so that a budget equal to an achievable mean is accepted.
constexpr double kBudgetTolerance = 1e-12;

bool within(double total_rate, double budget, std::size_t n) {
  const double limit = budget * static_cast<double>(n);
  return total_rate <= limit + kBudgetTolerance * std::max(1.0, std::abs(limit));
}

Selection summarize(std::span<const ImageCandidates> images, std::vector<int> choice,
                    bool feasible) {
  Selection s;
  s.choice = std::move(choice);
  s.feasible = feasible;
  if (images.empty()) return s;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& opt = images[i].options[static_cast<std::size_t>(s.choice[i])];
    s.mean_rate += opt.rate;
    s.mean_quality += opt.quality;
  }
  s.mean_rate /= static_cast<double>(images.size());
  s.mean_quality /= static_cast<double>(images.size());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

Selection select_models(std::span<const ImageCandidates> images, double budget_bpp) {
  const std::size_t n = images.size();
  std::vector<int> choice(n, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = images[i].options;
    choice[i] = o[1].rate < o[0].rate ? 1 : 0;
    total += o[static_cast<std::size_t>(choice[i])].rate;
  }
  if (!within(total, budget_bpp, n)) return summarize(images, std::vector<int>(n, 0), false);

  struct Upgrade {
    std::size_t image;
    double dr;
    double dq;
  };
  std::vector<Upgrade> upgrades;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& from = images[i].options[static_cast<std::size_t>(choice[i])];
    const auto& to = images[i].options[static_cast<std::size_t>(1 - choice[i])];
    const double dq = to.quality - from.quality;
    if (dq > 0.0) upgrades.push_back({i, to.rate - from.rate, dq});
  }
  // Free upgrades first, then by gain per bit; ties broken by image order.
  std::stable_sort(upgrades.begin(), upgrades.end(), [](const Upgrade& a, const Upgrade& b) {
    const bool a_free = a.dr <= 0.0, b_free = b.dr <= 0.0;
    if (a_free != b_free) return a_free;
    if (a_free) return false;
    return a.dq * b.dr > b.dq * a.dr;
  });
  for (const Upgrade& u : upgrades) {
    if (within(total + u.dr, budget_bpp, n)) {
      total += u.dr;
      choice[u.image] = 1 - choice[u.image];
    }
  }
  return summarize(images, std::move(choice), true);
}

Selection select_exhaustive(std::span<const ImageCandidates> images, double budget_bpp) {
  const std::size_t n = images.size();
  if (n > 24) throw std::invalid_argument("select_exhaustive: at most 24 images");
  double best_quality = -std::numeric_limits<double>::infinity();
  std::uint32_t best = 0;
  bool found = false;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double rate = 0.0, quality = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& o = images[i].options[(mask >> i) & 1u];
      rate += o.rate;
      quality += o.quality;
    }
    if (within(rate, budget_bpp, n) && quality > best_quality) {
      best_quality = quality;
      best = mask;
      found = true;
    }
  }
  if (!found) return summarize(images, std::vector<int>(n, 0), false);
  std::vector<int> choice(n);
  for (std::size_t i = 0; i < n; ++i) choice[i] = static_cast<int>((best >> i) & 1u);
  return summarize(images, std::move(choice), true);
}

std::vector<ImageCandidates> parse_stats_csv(std::istream& in) {
  std::map<std::string, std::size_t> index;
  std::vector<ImageCandidates> out;
  std::vector<std::array<bool, 2>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_csv(line);
    if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
    const std::string where = "stats csv line " + std::to_string(line_no);
    if (line_no == 1 && fields[0] == "image") continue;
    if (fields.size() != 5) throw std::invalid_argument(where + ": expected 5 fields");
    int model;
    if (fields[1] == "low" || fields[1] == "0") {
      model = 0;
    } else if (fields[1] == "high" || fields[1] == "1") {
      model = 1;
    } else {
      throw std::invalid_argument(where + ": model must be low/high or 0/1");
    }
    double bpp, quality;
    try {
      std::size_t used = 0;
      bpp = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("bpp");
      quality = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("ms_ssim");
    } catch (const std::exception&) {
      throw std::invalid_argument(where + ": bpp and ms_ssim must be numbers");
    }
    if (!(bpp >= 0.0) || !(quality >= 0.0 && quality <= 1.0)) {
      throw std::invalid_argument(where + ": bpp must be >= 0 and ms_ssim in [0, 1]");
    }
    auto [it, inserted] = index.emplace(fields[0], out.size());
    if (inserted) {
      out.push_back({fields[0], {}});
      seen.push_back({false, false});
    }
    if (seen[it->second][static_cast<std::size_t>(model)]) {
      throw std::invalid_argument(where + ": duplicate entry for " + fields[0]);
    }
    seen[it->second][static_cast<std::size_t>(model)] = true;
    out[it->second].options[static_cast<std::size_t>(model)] = {bpp, quality};
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!seen[i][0] || !seen[i][1]) {
      throw std::invalid_argument("stats csv: " + out[i].image + " needs both a low and a high row");
    }
  }
  return out;
}

void write_selection_csv(std::ostream& out, std::span<const ImageCandidates> images,
                         const Selection& selection) {
  out << "image,model,bpp,ms_ssim,cumulative_mean_bpp\n";
  double total = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int m = selection.choice[i];
    const auto& o = images[i].options[static_cast<std::size_t>(m)];
    total += o.rate;
    out << images[i].image << ',' << (m ? "high" : "low") << ',' << o.rate << ','
        << o.quality << ',' << total / static_cast<double>(i + 1) << '\n';
  }
}

}  // namespace rescomp
