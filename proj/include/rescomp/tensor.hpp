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

#ifndef RESCOMP_TENSOR_HPP_
#define RESCOMP_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rescomp {

// Dimensions of a dense NCHW tensor.
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  std::int64_t numel() const { return n * c * h * w; }
  std::int64_t plane() const { return h * w; }
  bool is_scalar() const { return numel() == 1; }
  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense 4-D real array, row-major over (n, c, h, w). Value semantics.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor scalar(Real v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* raw() { return data_.data(); }
  const Real* raw() const { return data_.data(); }

  Real& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  Real operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t h,
                      std::int64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  Real& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[static_cast<std::size_t>(offset(n, c, h, w))];
  }
  Real at(std::int64_t n, std::int64_t c, std::int64_t h,
          std::int64_t w) const {
    return data_[static_cast<std::size_t>(offset(n, c, h, w))];
  }

  // Pointer to the start of one (n, c) plane.
  Real* plane(std::int64_t n, std::int64_t c) {
    return data_.data() + offset(n, c, 0, 0);
  }
  const Real* plane(std::int64_t n, std::int64_t c) const {
    return data_.data() + offset(n, c, 0, 0);
  }

  void fill(Real v);
  Real item() const;  // requires numel() == 1

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) {
      out[i] = static_cast<Other>(data_[static_cast<std::size_t>(i)]);
    }
    return out;
  }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

// Throws std::invalid_argument naming both shapes when they differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace rescomp

#endif  // RESCOMP_TENSOR_HPP_
