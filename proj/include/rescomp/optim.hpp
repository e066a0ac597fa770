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

#ifndef RESCOMP_OPTIM_HPP_
#define RESCOMP_OPTIM_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "rescomp/autograd.hpp"

namespace rescomp {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Holds first/second moment buffers per
// parameter; parameters are updated in place and their grads left intact.
template <typename Real>
class Adam {
 public:
  Adam(std::vector<Var<Real>> params, AdamOptions options);

  void step();
  void zero_grad();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::int64_t steps() const { return t_; }

 private:
  std::vector<Var<Real>> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  std::int64_t t_ = 0;
};

// Gaussian with standard deviation stddev, resampled outside +-2 stddev.
template <typename Real>
Tensor<Real> truncated_normal(Shape shape, double stddev, std::mt19937_64& rng);

}  // namespace rescomp

#endif  // RESCOMP_OPTIM_HPP_
