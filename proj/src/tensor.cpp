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

#include "rescomp/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace rescomp {

std::string Shape::to_string() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, Real fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw std::invalid_argument("negative tensor dimension in " +
                                shape.to_string());
  }
  data_.assign(static_cast<std::size_t>(shape.numel()), fill);
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> data)
    : shape_(shape), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != shape.numel()) {
    std::ostringstream os;
    os << "tensor data length " << data_.size() << " does not match shape "
       << shape.to_string();
    throw std::invalid_argument(os.str());
  }
}

template <typename Real>
void Tensor<Real>::fill(Real v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename Real>
Real Tensor<Real>::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor " +
                                shape_.to_string());
  }
  return data_[0];
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.to_string() + " vs " + b.to_string());
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace rescomp
