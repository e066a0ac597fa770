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

// Rate-distortion training: J = lambda * d + R with R in bits per pixel.

#ifndef RESCOMP_TRAINING_HPP_
#define RESCOMP_TRAINING_HPP_

#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rescomp/image_io.hpp"
#include "rescomp/network.hpp"
#include "rescomp/optim.hpp"

namespace rescomp {

template <typename Real>
struct RdLoss {
  Var<Real> J;
  Var<Real> d;
  Var<Real> R;
  double lambda = 0.0;
};

// x and x_hat in [0, 1]. d is the MSE, or 1 - MS-SSIM; R = rate_bits /
// pixel_count.
template <typename Real>
RdLoss<Real> rd_loss(const Var<Real>& x, const Var<Real>& x_hat, const Var<Real>& rate_bits,
                     double lambda, Distortion distortion, std::int64_t pixel_count);

struct TrainConfig {
  int patch = 256;
  int batch = 8;
  std::int64_t iterations = 1000;
  double lr = 1e-4;
  double lr_final = 1e-5;
  std::int64_t lr_drop_at = -1;  // first iteration at lr_final; -1 keeps lr
  double aux_lr = 1e-3;
  std::uint64_t seed = 1;
  std::int64_t log_every = 1;
  std::int64_t checkpoint_every = 0;  // 0 writes only the final checkpoint
  std::string checkpoint_prefix;      // empty disables checkpoints
  std::string log_path;               // empty disables the CSV log

  // Throws std::invalid_argument.
  void validate() const;
};

struct TrainRecord {
  std::int64_t iteration = 0;
  double J = 0.0;
  double d = 0.0;
  double R = 0.0;
  double lr = 0.0;
};

class Trainer {
 public:
  // Images must be at least patch x patch. The model is updated in place.
  Trainer(CompressionModel<float>& model, std::vector<Image> dataset, TrainConfig config);

  TrainRecord step();
  // Runs the remaining iterations, logging and checkpointing as configured.
  // Throws std::logic_error if the trained prior lost CDF monotonicity.
  std::vector<TrainRecord> run();

  std::int64_t iteration() const { return iteration_; }
  double lr_at(std::int64_t iteration) const;

 private:
  Tensor<float> sample_batch();
  void log(const TrainRecord& r);

  CompressionModel<float>& model_;
  std::vector<Image> dataset_;
  TrainConfig config_;
  std::mt19937_64 rng_;
  Adam<float> optimizer_;
  Adam<float> aux_optimizer_;
  std::int64_t iteration_ = 0;
  std::unique_ptr<std::ofstream> log_;
};

// Smooth multi-channel gradients with a low-frequency ripple.
std::vector<Image> synthetic_images(int count, int width, int height, std::uint64_t seed);

// True when every channel's CDF logit is nondecreasing over the coding
// support.
bool prior_cdf_monotone(const FactorizedPrior<float>& prior);

}  // namespace rescomp

#endif  // RESCOMP_TRAINING_HPP_
