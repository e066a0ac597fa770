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

#include "rescomp/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rescomp/codec.hpp"
#include "rescomp/io_error.hpp"
#include "rescomp/metrics.hpp"

namespace rescomp {

template <typename Real>
RdLoss<Real> rd_loss(const Var<Real>& x, const Var<Real>& x_hat, const Var<Real>& rate_bits,
                     double lambda, Distortion distortion, std::int64_t pixel_count) {
  require_same_shape(x.shape(), x_hat.shape(), "rd_loss");
  if (pixel_count <= 0) throw std::invalid_argument("rd_loss: pixel_count must be positive");
  RdLoss<Real> out;
  out.lambda = lambda;
  if (distortion == Distortion::kMse) {
    out.d = mean(square(sub(x, x_hat)));
  } else {
    out.d = add_scalar(scale(ms_ssim(x, x_hat, 1.0), Real(-1)), Real(1));
  }
  out.R = scale(rate_bits, static_cast<Real>(1.0 / static_cast<double>(pixel_count)));
  out.J = add(scale(out.d, static_cast<Real>(lambda)), out.R);
  return out;
}

void TrainConfig::validate() const {
  if (patch <= 0 || batch <= 0) throw std::invalid_argument("train: patch and batch must be positive");
  if (iterations < 0) throw std::invalid_argument("train: iterations must be non-negative");
  if (lr_drop_at >= 0 && lr_drop_at >= iterations) {
    throw std::invalid_argument("train: lr drop must come before the last iteration");
  }
  if (!(lr > 0.0) || !(lr_final > 0.0) || !(aux_lr > 0.0)) {
    throw std::invalid_argument("train: learning rates must be positive");
  }
  if (log_every <= 0 || checkpoint_every < 0) {
    throw std::invalid_argument("train: log_every must be positive, checkpoint_every non-negative");
  }
}

Trainer::Trainer(CompressionModel<float>& model, std::vector<Image> dataset, TrainConfig config)
    : model_(model),
      dataset_(std::move(dataset)),
      config_(std::move(config)),
      rng_(config_.seed),
      optimizer_(model.model_parameters(), AdamOptions{config_.lr}),
      aux_optimizer_({model.prior().quantiles()}, AdamOptions{config_.aux_lr}) {
  config_.validate();
  if (dataset_.empty()) throw std::invalid_argument("train: empty dataset");
  if (config_.patch % model_.config().size_multiple() != 0) {
    throw std::invalid_argument("train: patch must be a multiple of " +
                                std::to_string(model_.config().size_multiple()));
  }
  if (model_.config().distortion == Distortion::kMsSsim && config_.patch < kMsSsimMinSide) {
    throw std::invalid_argument("train: MS-SSIM training needs patches of at least " +
                                std::to_string(kMsSsimMinSide));
  }
  for (const Image& img : dataset_) {
    if (img.width < config_.patch || img.height < config_.patch) {
      throw std::invalid_argument("train: image of " + std::to_string(img.width) + "x" +
                                  std::to_string(img.height) + " is smaller than the patch");
    }
  }
  if (!config_.log_path.empty()) {
    log_ = std::make_unique<std::ofstream>(config_.log_path);
    if (!*log_) throw IoError("cannot write " + config_.log_path);
    *log_ << "iteration,J,d,R,lr\n";
  }
}

double Trainer::lr_at(std::int64_t iteration) const {
  return config_.lr_drop_at >= 0 && iteration >= config_.lr_drop_at ? config_.lr_final
                                                                    : config_.lr;
}

Tensor<float> Trainer::sample_batch() {
  const int p = config_.patch;
  Tensor<float> x(Shape{config_.batch, 3, p, p});
  std::uniform_int_distribution<std::size_t> pick(0, dataset_.size() - 1);
  for (int n = 0; n < config_.batch; ++n) {
    const Image& img = dataset_[pick(rng_)];
    std::uniform_int_distribution<int> oy(0, img.height - p);
    std::uniform_int_distribution<int> ox(0, img.width - p);
    const int y0 = oy(rng_), x0 = ox(rng_);
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) x.at(n, c, i, j) = img.at(y0 + i, x0 + j, c) / 255.0f;
      }
    }
  }
  return x;
}

TrainRecord Trainer::step() {
  const double lr = lr_at(iteration_);
  optimizer_.set_lr(lr);
  const Var<float> x(sample_batch());
  const ForwardResult<float> fwd = model_.forward(x, QuantMode::kTrain, rng_);
  const Shape s = x.shape();
  const RdLoss<float> loss = rd_loss(x, fwd.x_hat, add(fwd.y_bits, fwd.z_bits),
                                     model_.config().lambda, model_.config().distortion,
                                     s.n * s.h * s.w);
  optimizer_.zero_grad();
  backward(loss.J);
  optimizer_.step();

  aux_optimizer_.zero_grad();
  backward(model_.prior().aux_loss());
  aux_optimizer_.step();

  TrainRecord r;
  r.iteration = iteration_++;
  r.d = loss.d.value().item();
  r.R = loss.R.value().item();
  r.J = loss.lambda * r.d + r.R;
  r.lr = lr;
  return r;
}

void Trainer::log(const TrainRecord& r) {
  if (!log_ || r.iteration % config_.log_every != 0) return;
  log_->precision(9);
  *log_ << r.iteration << ',' << r.J << ',' << r.d << ',' << r.R << ',' << r.lr << '\n';
  log_->flush();
}

std::vector<TrainRecord> Trainer::run() {
  std::vector<TrainRecord> records;
  while (iteration_ < config_.iterations) {
    records.push_back(step());
    log(records.back());
    if (!config_.checkpoint_prefix.empty() && config_.checkpoint_every > 0 &&
        iteration_ % config_.checkpoint_every == 0) {
      save_checkpoint(config_.checkpoint_prefix + "_" + std::to_string(iteration_) + ".rckp",
                      model_, static_cast<std::uint64_t>(iteration_));
    }
  }
  if (!config_.checkpoint_prefix.empty()) {
    save_checkpoint(config_.checkpoint_prefix + "_final.rckp", model_,
                    static_cast<std::uint64_t>(iteration_));
  }
  if (!prior_cdf_monotone(model_.prior())) {
    throw std::logic_error("train: factorized prior CDF is not monotone");
  }
  return records;
}

std::vector<Image> synthetic_images(int count, int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Image> out;
  for (int k = 0; k < count; ++k) {
    Image img;
    img.width = width;
    img.height = height;
    img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
    std::array<std::array<double, 6>, 3> coef{};
    for (auto& c : coef) {
      for (double& v : c) v = u(rng);
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / width, fy = static_cast<double>(y) / height;
        for (int c = 0; c < 3; ++c) {
          const auto& a = coef[static_cast<std::size_t>(c)];
          const double ripple = 0.15 * std::sin(2.0 * std::numbers::pi *
                                                ((1.0 + 3.0 * a[3]) * fx + (1.0 + 3.0 * a[4]) * fy) +
                                                6.0 * a[5]);
          const double v = 0.2 * a[0] + 0.6 * (a[1] * fx + (1.0 - a[1]) * fy) * a[2] + 0.2 + ripple;
          img.rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
              static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

bool prior_cdf_monotone(const FactorizedPrior<float>& prior) {
  NoGradGuard no_grad;
  const std::int64_t steps = kSupportMax - kSupportMin;  // grid [-127, 127]
  Tensor<float> grid(Shape{1, prior.channels(), 1, steps});
  for (std::int64_t c = 0; c < prior.channels(); ++c) {
    for (std::int64_t i = 0; i < steps; ++i) grid.at(0, c, 0, i) = static_cast<float>(kSupportMin + i);
  }
  const Var<float> logits = prior.cumulative_logits(Var<float>(grid));
  for (std::int64_t c = 0; c < prior.channels(); ++c) {
    for (std::int64_t i = 1; i < steps; ++i) {
      if (logits.value().at(0, c, 0, i) < logits.value().at(0, c, 0, i - 1)) return false;
    }
  }
  return true;
}

template RdLoss<float> rd_loss(const Var<float>&, const Var<float>&, const Var<float>&, double,
                               Distortion, std::int64_t);
template RdLoss<double> rd_loss(const Var<double>&, const Var<double>&, const Var<double>&,
                                double, Distortion, std::int64_t);

}  // namespace rescomp
