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

#include "rescomp/optim.hpp"

#include <cmath>

namespace rescomp {

template <typename Real>
Adam<Real>::Adam(std::vector<Var<Real>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.value().numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.value().numel()), 0.0);
  }
}

template <typename Real>
void Adam<Real>::step() {
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<Real>& p = params_[i];
    if (!p.has_grad()) continue;
    Tensor<Real>& value = p.mutable_value();
    const Tensor<Real>& grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::int64_t j = 0; j < value.numel(); ++j) {
      const double g = grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      value[j] -= static_cast<Real>(options_.lr * m_hat /
                                    (std::sqrt(v_hat) + options_.eps));
    }
  }
}

template <typename Real>
void Adam<Real>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename Real>
Tensor<Real> truncated_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<Real> t(shape);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    double v = dist(rng);
    while (std::abs(v) > 2.0) v = dist(rng);
    t[i] = static_cast<Real>(v * stddev);
  }
  return t;
}

template class Adam<float>;
template class Adam<double>;
template Tensor<float> truncated_normal(Shape, double, std::mt19937_64&);
template Tensor<double> truncated_normal(Shape, double, std::mt19937_64&);

}  // namespace rescomp
