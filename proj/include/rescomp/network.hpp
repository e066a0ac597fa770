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

// Runtime compression network assembled from a ModelConfig's layer list.

#ifndef RESCOMP_NETWORK_HPP_
#define RESCOMP_NETWORK_HPP_

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rescomp/entropy.hpp"
#include "rescomp/layers.hpp"
#include "rescomp/models.hpp"

namespace rescomp {

template <typename Real>
struct EntropyParams {
  Var<Real> mu;
  Var<Real> sigma;  // in [kSigmaMin, kSigmaMax]
};

template <typename Real>
struct ForwardResult {
  Var<Real> x_hat;
  Var<Real> y;
  Var<Real> y_hat;  // noisy in train mode, rounded in eval mode
  Var<Real> z;      // undefined without a hyperprior
  Var<Real> z_hat;
  EntropyParams<Real> params;
  Var<Real> y_bits;  // scalar
  Var<Real> z_bits;  // scalar, zero without a hyperprior
};

template <typename Real>
class CompressionModel {
 public:
  CompressionModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  std::vector<NamedParameter<Real>> parameters() const;
  // Everything except the prior's quantiles, which only the auxiliary loss
  // updates.
  std::vector<Var<Real>> model_parameters() const;
  std::int64_t parameter_count() const;

  const FactorizedPrior<Real>& prior() const { return *prior_; }

  Var<Real> analysis(const Var<Real>& x) const;
  Var<Real> hyper_analysis(const Var<Real>& y) const;
  EntropyParams<Real> entropy_parameters(const Var<Real>& z_hat) const;
  Var<Real> synthesis(const Var<Real>& y_hat) const;

  // x: (N, 3, H, W) in [0, 1] with H and W multiples of size_multiple().
  ForwardResult<Real> forward(const Var<Real>& x, QuantMode mode,
                              std::mt19937_64& rng) const;

 private:
  void check_input(const Shape& s) const;

  ModelConfig config_;
  std::unique_ptr<Sequential<Real>> encoder_;
  std::unique_ptr<Sequential<Real>> hyper_encoder_;
  std::unique_ptr<Sequential<Real>> hyper_decoder_;  // includes the 1x1 head
  std::unique_ptr<Sequential<Real>> decoder_;
  std::unique_ptr<FactorizedPrior<Real>> prior_;
};

// Mirror padding up to the next multiple of `multiple` on the bottom and
// right, and the matching crop.
template <typename Real>
Tensor<Real> reflect_pad(const Tensor<Real>& x, std::int64_t multiple);
template <typename Real>
Tensor<Real> crop(const Tensor<Real>& x, std::int64_t height, std::int64_t width);

}  // namespace rescomp

#endif  // RESCOMP_NETWORK_HPP_
