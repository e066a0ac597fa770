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

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rescomp/codec.hpp"
#include "rescomp/complexity.hpp"
#include "rescomp/ratecontrol.hpp"
#include "rescomp/training.hpp"
#include "support/grad_cases.hpp"

namespace {

using namespace rescomp;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct ExpectedRow {
  const char* name;
  std::int64_t params;
  const char* flops;
};

Outcome complexity_table() {
  const std::vector<ExpectedRow> expected = {
      {"conv1", 31232, "5.12e8"},    {"conv2", 1327232, "5.44e9"},  {"conv3", 1327232, "1.36e9"},
      {"conv4", 1327104, "3.40e8"},  {"GDN/IGDN", 99072, ""},       {"Hconv1", 147584, "3.78e7"},
      {"Hconv2", 409728, "2.62e7"},  {"Hconv3", 409728, "6.56e6"},  {"FactorizedPrior", 5888, ""},
      {"HTconv1", 409728, "2.62e7"}, {"HTconv2", 614592, "1.57e8"}, {"HTconv3", 442624, "1.13e8"},
      {"layer1", 164480, "4.21e7"},  {"layer2", 328192, "8.40e7"},  {"layer3", 131072, "3.36e7"},
      {"Tconv1", 1327232, "1.36e9"}, {"Tconv2", 1327232, "5.44e9"}, {"Tconv3", 1327232, "2.17e10"},
      {"Tconv4", 31107, "2.04e9"},
  };
  const auto t0 = Clock::now();
  const ComplexityReport report = model_complexity(build_hyperprior(9));
  const std::string table = emit_table(report, TableFormat::kText);
  const double elapsed = seconds_since(t0);
  int matched = 0;
  std::string first_miss;
  for (std::size_t i = 0; i < expected.size() && i < report.rows.size(); ++i) {
    const ComplexityRow& r = report.rows[i];
    const bool flops_ok = *expected[i].flops
                              ? r.counts_flops && format_sci3(static_cast<double>(r.flops)) == expected[i].flops
                              : !r.counts_flops;
    if (r.name == expected[i].name && r.params == expected[i].params && flops_ok) {
      ++matched;
    } else if (first_miss.empty()) {
      first_miss = expected[i].name;
    }
  }
  const bool total_ok = report.total_params == 11188291 &&
                        format_sci3(static_cast<double>(report.total_flops)) == "3.88e10" &&
                        table.find("11188291") != std::string::npos;
  Outcome o;
  o.pass = matched == static_cast<int>(expected.size()) && report.rows.size() == expected.size() && total_ok &&
           elapsed < 1.0;
  o.detail = fmt("%d/%zu rows exact, total %lld params / %s FLOPs, %.3f s", matched, expected.size(),
                 static_cast<long long>(report.total_params),
                 format_sci3(static_cast<double>(report.total_flops)).c_str(), elapsed);
  if (!first_miss.empty()) o.detail += ", first mismatch " + first_miss;
  return o;
}

Outcome family_totals() {
  struct Exact { ModelConfig c; std::int64_t params; const char* relative; };
  const std::vector<Exact> exact = {
      {build_baseline(3), 997379, "0.36"},     {build_baseline(5), 2582531, "1.00"},
      {build_baseline(9), 8130563, "3.24"},    {build_hyperprior(3), 4055107, "0.40"},
      {build_hyperprior(5), 5640259, "1.04"},  {build_hyperprior(9), 11188291, "3.28"},
  };
  bool ok = true;
  for (const Exact& e : exact) {
    const ComplexityReport r = model_complexity(e.c);
    ok = ok && r.total_params == e.params && fmt("%.2f", r.relative) == e.relative;
  }
  struct Approx { ModelConfig c; double reported; };
  const std::vector<Approx> resnets = {
      {build_resnet(3, Upsampler::kTConv), 5716355},
      {build_resnet(4, Upsampler::kTConv), 6684931},
      {build_resnet(4, Upsampler::kSubpixel), 8172172},
      {build_resnet(4, Upsampler::kSubpixel, 192), 11627916},
  };
  std::string gaps;
  for (const Approx& a : resnets) {
    const double total = static_cast<double>(model_complexity(a.c).total_params);
    const double gap = (total - a.reported) / a.reported;
    ok = ok && std::abs(gap) < 0.05;
    gaps += fmt(" %s %+.2f%%", a.c.name().c_str(), 100.0 * gap);
  }
  return {ok, "Baseline/HyperPrior totals and relative FLOPs exact; ResNet gaps:" + gaps};
}

// Marks the input pixels that reach the centre output by back-propagating
// from it through all-ones kernels, on a single-row image.
int traced_receptive_field(const std::vector<KernelStride>& stack) {
  constexpr int kWidth = 1024;
  Var<double> x = Var<double>::parameter(Tensor<double>(Shape{1, 1, 1, kWidth}, 1.0));
  Var<double> h = x;
  for (const KernelStride& ks : stack) {
    const Var<double> w(Tensor<double>(Shape{1, 1, ks.kernel, ks.kernel}, 1.0));
    h = conv2d(h, w, Var<double>(), ks.stride);
  }
  Tensor<double> pick(h.shape());
  pick.at(0, 0, 0, h.shape().w / 2) = 1.0;
  backward(sum(mul(h, constant(pick))));
  int lo = kWidth, hi = -1;
  for (int i = 0; i < kWidth; ++i) {
    if (x.grad()[i] != 0.0) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }
  }
  return hi - lo + 1;
}

Outcome receptive_fields() {
  const std::vector<KernelStride> four(4, {3, 1}), three(3, {3, 1});
  bool ok = receptive_field(four) == 9 && receptive_field(three) == 7;
  const std::vector<KernelStride> options = {{1, 1}, {3, 1}, {5, 1}, {9, 1},
                                             {1, 2}, {3, 2}, {5, 2}, {9, 2}};
  int agree = 0, total = 0;
  std::vector<KernelStride> stack;
  std::function<void(int)> walk = [&](int depth) {
    if (!stack.empty()) {
      ++total;
      if (receptive_field(stack) == traced_receptive_field(stack)) ++agree;
    }
    if (depth == 5) return;
    for (const KernelStride& ks : options) {
      stack.push_back(ks);
      walk(depth + 1);
      stack.pop_back();
    }
  };
  walk(0);
  ok = ok && agree == total;
  return {ok, fmt("[3x3]x4 = %d, [3x3]x3 = %d, tracing agrees on %d/%d stacks", receptive_field(four),
                  receptive_field(three), agree, total)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  constexpr int kCases = 20;
  struct Family { const char* name; std::function<double(std::uint64_t)> run; double worst = 0.0; };
  std::vector<Family> families = {
      {"conv2d", [](std::uint64_t s) { return testing::conv_case(s); }},
      {"tconv", [](std::uint64_t s) { return testing::tconv_case(s); }},
      {"gdn", [](std::uint64_t s) { return testing::gdn_case(s, false); }},
      {"igdn", [](std::uint64_t s) { return testing::gdn_case(s, true); }},
      {"subpixel", [](std::uint64_t s) { return testing::subpixel_case(s); }},
      {"rd_loss(mse)", [](std::uint64_t s) { return testing::rd_loss_case(s, Distortion::kMse); }},
      {"rd_loss(ms-ssim)", [](std::uint64_t s) { return testing::rd_loss_case(s, Distortion::kMsSsim); }},
  };
  bool ok = true;
  std::string detail;
  for (Family& f : families) {
    for (int s = 0; s < kCases; ++s) f.worst = std::max(f.worst, f.run(1000 + s));
    ok = ok && f.worst < 1e-4;
    detail += fmt("%s%s %.1e", detail.empty() ? "" : ", ", f.name, f.worst);
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 60.0;
  return {ok, fmt("%d cases each, worst rel. err: ", kCases) + detail + fmt(", %.1f s", elapsed)};
}

Outcome entropy_codec() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  int lossless = 0, in_bounds = 0;
  double worst_ratio = 0.0, total_info = 0.0, total_coded = 0.0;
  constexpr int kTensors = 1000;
  for (int t = 0; t < kTensors; ++t) {
    std::uniform_int_distribution<int> dim(1, 8);
    const Shape shape{1, dim(rng), dim(rng), dim(rng)};
    Tensor<float> mu(shape), sigma(shape), y(shape);
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      mu[i] = static_cast<float>(std::uniform_real_distribution<double>(-40.0, 40.0)(rng));
      sigma[i] = static_cast<float>(std::exp(
          std::uniform_real_distribution<double>(std::log(kSigmaMin), std::log(64.0))(rng)));
      const double draw = std::nearbyint(mu[i] + sigma[i] * normal(rng));
      y[i] = static_cast<float>(std::clamp<double>(draw, kSupportMin, kSupportMax));
    }
    CodingStats stats;
    const std::vector<std::uint8_t> bytes = encode_gaussian(y, mu, sigma, &stats);
    const Tensor<float> back = decode_gaussian(bytes, mu, sigma);
    bool same = true;
    for (std::int64_t i = 0; i < y.numel(); ++i) same = same && back[i] == y[i];
    lossless += same ? 1 : 0;
    const double coded = 8.0 * static_cast<double>(bytes.size());
    const double est = stats.information_bits;
    if (coded >= est - 1.0 && coded <= est * 1.01 + 64.0) ++in_bounds;
    worst_ratio = std::max(worst_ratio, (coded - est));
    total_info += est;
    total_coded += coded;
  }
  const double pmf = gaussian_pmf(0, 0.0, 1.0);
  const double oracle = std::erf(0.5 / std::sqrt(2.0));
  const bool ok = lossless == kTensors && in_bounds == kTensors && std::abs(pmf - 0.38292) < 1e-5 &&
                  std::abs(pmf - oracle) < 1e-12;
  return {ok, fmt("%d/%d lossless, %d/%d within [est-1, 1.01 est + 64] (max excess %.1f bits, "
                  "total %.0f coded vs %.0f est), pmf(0;0,1) = %.6f",
                  lossless, kTensors, in_bounds, kTensors, worst_ratio, total_coded, total_info, pmf)};
}

Outcome bitstream() {
  ModelConfig c;
  c.family = Family::kHyperPrior;
  c.kernel = 5;
  c.channels = 32;
  c.bottleneck = 32;
  resolve_layers(c);
  const CompressionModel<float> encoder(c, 11);
  const std::vector<std::uint8_t> ckpt = checkpoint_bytes(encoder);
  const std::vector<Image> images = synthetic_images(10, 256, 256, 99);

  const auto encode_all = [&] {
    std::vector<std::vector<std::uint8_t>> files;
    for (std::size_t i = 0; i < images.size(); ++i) {
      files.push_back(compress(encoder, images[i], i % 2 == 1).file);
    }
    return files;
  };
  // The decoder only sees the checkpoint and the files.
  const auto decode_all = [&](const std::vector<std::vector<std::uint8_t>>& files) {
    const CompressionModel<float> decoder = model_from_checkpoint(ckpt);
    std::vector<Decompressed> out;
    for (const auto& f : files) out.push_back(decompress(decoder, f));
    return out;
  };
  const auto first = encode_all(), second = encode_all();
  const auto dec1 = decode_all(first), dec2 = decode_all(second);
  bool identical = first == second, flags = true, deterministic = true, exact = true;
  double bpp = 0.0;
  std::mt19937_64 rng(0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    flags = flags && dec1[i].model_flag == (i % 2 == 1) && deserialize(first[i]).model_flag == (i % 2 == 1);
    deterministic = deterministic && dec1[i].image.rgb == dec2[i].image.rgb;
    NoGradGuard no_grad;
    const ForwardResult<float> fwd =
        encoder.forward(Var<float>(to_tensor<float>(images[i])), QuantMode::kEval, rng);
    exact = exact && to_image(fwd.x_hat.value()).rgb == dec1[i].image.rgb;
    bpp += 8.0 * static_cast<double>(first[i].size()) / (256.0 * 256.0) / 10.0;
  }
  return {identical && flags && deterministic && exact,
          fmt("10 images at 256x256 (%s): files byte-identical %s, decodes identical %s, "
              "matches eval reconstruction %s, flags round-trip %s, mean %.3f bpp",
              c.name().c_str(), identical ? "yes" : "no", deterministic ? "yes" : "no",
              exact ? "yes" : "no", flags ? "yes" : "no", bpp)};
}

Outcome selector() {
  std::mt19937_64 rng(77);
  std::ofstream gaps("selector_gaps.csv");
  gaps << "instance,images,budget,greedy_quality,optimal_quality,gap\n";
  int optimal = 0, logged = 0, violations = 0, infeasible = 0;
  constexpr int kInstances = 500;
  for (int t = 0; t < kInstances; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<ImageCandidates> images(static_cast<std::size_t>(n));
    double low = 0.0, high = 0.0;
    for (auto& c : images) {
      c.options[0] = {std::uniform_real_distribution<double>(0.05, 0.3)(rng),
                      std::uniform_real_distribution<double>(0.9, 0.99)(rng)};
      c.options[1] = {c.options[0].rate + std::uniform_real_distribution<double>(0.0, 0.2)(rng),
                      std::min(1.0, c.options[0].quality +
                                        std::uniform_real_distribution<double>(-0.005, 0.03)(rng))};
      low += c.options[0].rate / n;
      high += c.options[1].rate / n;
    }
    const double budget = std::uniform_real_distribution<double>(low - 0.02, high + 0.02)(rng);
    const Selection g = select_models(images, budget);
    const Selection e = select_exhaustive(images, budget);
    if (!e.feasible) {
      ++infeasible;
      if (g.feasible) ++violations;
      continue;
    }
    if (!g.feasible || g.mean_rate > budget * (1 + 1e-12)) ++violations;
    if (g.mean_quality >= e.mean_quality - 1e-9) {
      ++optimal;
    } else {
      ++logged;
      gaps << t << ',' << n << ',' << budget << ',' << g.mean_quality << ',' << e.mean_quality << ','
           << e.mean_quality - g.mean_quality << '\n';
    }
  }
  return {violations == 0,
          fmt("%d instances: %d optimal, %d gap cases logged to selector_gaps.csv, %d infeasible, "
              "%d budget violations",
              kInstances, optimal, logged, infeasible, violations)};
}

struct RunSummary {
  double j_start = 0.0, j_end = 0.0;
  double d = 0.0, r = 0.0;  // eval-mode mean over the dataset
};

RunSummary train_once(double lambda, const std::vector<Image>& data) {
  ModelConfig c;
  c.family = Family::kHyperPrior;
  c.kernel = 5;
  c.channels = 32;
  c.bottleneck = 32;
  c.stages = 2;
  c.lambda = lambda;
  resolve_layers(c);
  CompressionModel<float> model(c, 5);
  TrainConfig t;
  t.patch = 64;
  t.batch = 8;
  t.iterations = 200;
  t.lr = 1e-3;
  t.lr_final = 1e-4;
  t.lr_drop_at = 160;
  t.seed = 17;
  Trainer trainer(model, data, t);
  const std::vector<TrainRecord> log = trainer.run();
  RunSummary s;
  for (int i = 0; i < 20; ++i) {
    s.j_start += log[static_cast<std::size_t>(i)].J / 20.0;
    s.j_end += log[log.size() - 20 + static_cast<std::size_t>(i)].J / 20.0;
  }
  NoGradGuard no_grad;
  std::mt19937_64 rng(0);
  for (const Image& img : data) {
    const Var<float> x(to_tensor<float>(img));
    const ForwardResult<float> f = model.forward(x, QuantMode::kEval, rng);
    const RdLoss<float> l = rd_loss(x, f.x_hat, add(f.y_bits, f.z_bits), lambda, Distortion::kMse,
                                    static_cast<std::int64_t>(img.width) * img.height);
    s.d += l.d.value().item() / static_cast<double>(data.size());
    s.r += l.R.value().item() / static_cast<double>(data.size());
  }
  return s;
}

Outcome training_smoke() {
  const auto t0 = Clock::now();
  const std::vector<Image> data = synthetic_images(16, 256, 256, 3);
  const double lambda_low = 50.0, lambda_high = 1000.0;
  const RunSummary low = train_once(lambda_low, data);
  const RunSummary high = train_once(lambda_high, data);
  const double drop_low = 1.0 - low.j_end / low.j_start;
  const double drop_high = 1.0 - high.j_end / high.j_start;
  const bool ordering = high.r > low.r && high.d < low.d;
  const double elapsed = seconds_since(t0);
  return {drop_low >= 0.2 && drop_high >= 0.2 && ordering && elapsed < 600.0,
          fmt("smoothed J drop %.0f%% (lambda %.0f) and %.0f%% (lambda %.0f); eval d/R: "
              "lambda %.0f -> %.5f / %.3f bpp, lambda %.0f -> %.5f / %.3f bpp; %.0f s",
              100 * drop_low, lambda_low, 100 * drop_high, lambda_high, lambda_low, low.d, low.r,
              lambda_high, high.d, high.r, elapsed)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"complexity table", complexity_table},
      {"complexity family totals", family_totals},
      {"receptive field oracle", receptive_fields},
      {"gradient suite", gradient_suite},
      {"entropy codec", entropy_codec},
      {"bitstream", bitstream},
      {"rate-control selector", selector},
      {"training smoke test", training_smoke},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
