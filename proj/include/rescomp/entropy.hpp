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

// Quantization, probability models for the latents and their rates.

#ifndef RESCOMP_ENTROPY_HPP_
#define RESCOMP_ENTROPY_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rescomp/layers.hpp"

namespace rescomp {

inline constexpr double kProbFloor = 1.0 / 65536.0;
inline constexpr double kSigmaMin = 1e-6;
inline constexpr double kSigmaMax = 1e3;
// Lower bound on training-time likelihoods.
inline constexpr double kLikelihoodBound = 1e-9;
inline constexpr std::int64_t kSupportMin = -127;
inline constexpr std::int64_t kSupportMax = 128;
inline constexpr std::int64_t kSupportSize = kSupportMax - kSupportMin + 1;

enum class QuantMode { kTrain, kEval };

// Train: x + U[-0.5, 0.5) noise, identity gradient. Eval: round half to
// even, no gradient.
template <typename Real>
Var<Real> quantize(const Var<Real>& x, QuantMode mode, std::mt19937_64& rng);

// Eval-mode rounding around a per-channel offset: round(x - m) + m.
// offset: (1, C, 1, 1).
template <typename Real>
Tensor<Real> quantize_around(const Tensor<Real>& x, const Tensor<Real>& offset);

double normal_cdf(double x);

// Probability of the unit bin around k under N(mu, sigma^2), floored.
double gaussian_pmf(std::int64_t k, double mu, double sigma,
                    double floor = kProbFloor);

// Mass of [v - 0.5, v + 0.5) around the mean, elementwise; differentiable in
// all three arguments.
template <typename Real>
Var<Real> gaussian_likelihood(const Var<Real>& y, const Var<Real>& mu,
                              const Var<Real>& sigma);

// max(p, bound); the gradient passes only where p > bound.
template <typename Real>
Var<Real> lower_bound(const Var<Real>& p, Real bound);

// -sum(log2 p) as a scalar.
template <typename Real>
Var<Real> total_bits(const Var<Real>& likelihoods);

// |sigmoid(s*upper) - sigmoid(s*lower)| with s = -sign(lower + upper), which
// keeps the difference away from the saturated side.
template <typename Real>
Var<Real> sigmoid_difference(const Var<Real>& lower, const Var<Real>& upper);

// Per-channel univariate density with a learned CDF. Each channel maps x
// through four 1-wide-in/out layers of widths 1 -> 3 -> 3 -> 3 -> 1 with
// softplus-positive matrices and tanh gates; the output is the CDF logit.
template <typename Real>
class FactorizedPrior {
 public:
  FactorizedPrior(std::int64_t channels, std::mt19937_64& rng);

  std::int64_t channels() const { return channels_; }

  // CDF logits evaluated at every element of x, shape (N, C, H, W).
  Var<Real> cumulative_logits(const Var<Real>& x) const;
  // Likelihood of the unit bin centred on each element (bounded below).
  Var<Real> likelihood(const Var<Real>& x) const;
  // Pulls the stored quantiles to the 1e-9 tails and the median; the
  // density parameters are held fixed.
  Var<Real> aux_loss() const;
  // Per-channel medians, shape (1, C, 1, 1).
  Tensor<Real> medians() const;
  // Floored probabilities of median + s for s in [kSupportMin, kSupportMax].
  std::vector<double> channel_pmf(std::int64_t c) const;

  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Real>>& out) const;
  std::vector<Var<Real>> density_parameters() const;
  const Var<Real>& quantiles() const { return quantiles_; }

 private:
  Var<Real> logits_with(const Var<Real>& x,
                        const std::vector<Var<Real>>& params) const;

  std::int64_t channels_;
  // matrices_[i]: (C, out*in, 1, 1); biases_[i]: (C, out, 1, 1);
  // factors_[i]: (C, 3, 1, 1).
  std::vector<Var<Real>> matrices_;
  std::vector<Var<Real>> biases_;
  std::vector<Var<Real>> factors_;
  Var<Real> quantiles_;  // (1, C, 1, 3): lower tail, median, upper tail
};

}  // namespace rescomp

#endif  // RESCOMP_ENTROPY_HPP_
