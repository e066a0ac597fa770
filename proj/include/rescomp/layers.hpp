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

// Compression-specific layers: GDN/IGDN, residual units with projection
// shortcuts and sub-pixel upsampling.

#ifndef RESCOMP_LAYERS_HPP_
#define RESCOMP_LAYERS_HPP_

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rescomp/ops.hpp"

namespace rescomp {

inline constexpr double kGdnBetaFloor = 1e-6;
inline constexpr double kDefaultLeakySlope = 0.2;

// beta (C) plus gamma (C x C).
constexpr std::int64_t gdn_param_count(std::int64_t channels) {
  return (channels + 1) * channels;
}

// y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2), or x_i * sqrt(...) when
// inverse is set. beta: (1, C, 1, 1); gamma: (C, C, 1, 1) with gamma[i][j]
// weighting input channel j in the normalizer of channel i.
template <typename Real>
Var<Real> gdn(const Var<Real>& x, const Var<Real>& beta, const Var<Real>& gamma,
              bool inverse);

// Solves gdn(x) = y for x pixel by pixel. The squared inputs satisfy the
// linear system (I - diag(y^2) gamma) x^2 = diag(y^2) beta.
template <typename Real>
Tensor<Real> gdn_exact_inverse(const Tensor<Real>& y, const Tensor<Real>& beta,
                               const Tensor<Real>& gamma);

template <typename Real>
struct NamedParameter {
  std::string name;
  Var<Real> var;
};

template <typename Real>
class Module {
 public:
  virtual ~Module() = default;
  virtual Var<Real> forward(const Var<Real>& x) const = 0;
  virtual void collect_parameters(const std::string& prefix,
                                  std::vector<NamedParameter<Real>>& out) const = 0;

  std::vector<NamedParameter<Real>> parameters(const std::string& prefix = "") const {
    std::vector<NamedParameter<Real>> out;
    collect_parameters(prefix, out);
    return out;
  }
  std::int64_t parameter_count() const;
};

enum class Activation { kNone, kLeakyRelu };

template <typename Real>
class Conv2d : public Module<Real> {
 public:
  Conv2d(Var<Real> weight, Var<Real> bias, int stride,
         Activation activation = Activation::kNone,
         Real slope = Real(kDefaultLeakySlope));
  static std::unique_ptr<Conv2d> create(std::int64_t c_in, std::int64_t c_out,
                                        int kernel, int stride, bool bias,
                                        Activation activation, Real slope,
                                        std::mt19937_64& rng);

  Var<Real> forward(const Var<Real>& x) const override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Real>>& out) const override;

  const Var<Real>& weight() const { return weight_; }
  const Var<Real>& bias() const { return bias_; }

 private:
  Var<Real> weight_;
  Var<Real> bias_;
  int stride_;
  Activation activation_;
  Real slope_;
};

template <typename Real>
class ConvTranspose2d : public Module<Real> {
 public:
  ConvTranspose2d(Var<Real> weight, Var<Real> bias, int stride,
                  Activation activation = Activation::kNone,
                  Real slope = Real(kDefaultLeakySlope));
  static std::unique_ptr<ConvTranspose2d> create(std::int64_t c_in,
                                                 std::int64_t c_out, int kernel,
                                                 int stride, bool bias,
                                                 Activation activation,
                                                 Real slope,
                                                 std::mt19937_64& rng);

  Var<Real> forward(const Var<Real>& x) const override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Real>>& out) const override;

 private:
  Var<Real> weight_;
  Var<Real> bias_;
  int stride_;
  Activation activation_;
  Real slope_;
};

// Stride-1 conv to C_out * r^2 channels followed by depth_to_space(r).
template <typename Real>
Var<Real> subpixel_upsample(const Var<Real>& x, const Var<Real>& weight,
                            const Var<Real>& bias, int r);

template <typename Real>
class SubpixelConv : public Module<Real> {
 public:
  SubpixelConv(Var<Real> weight, Var<Real> bias, int r,
               Activation activation = Activation::kNone,
               Real slope = Real(kDefaultLeakySlope));
  static std::unique_ptr<SubpixelConv> create(std::int64_t c_in,
                                              std::int64_t c_out, int kernel,
                                              int r, bool bias,
                                              Activation activation, Real slope,
                                              std::mt19937_64& rng);

  Var<Real> forward(const Var<Real>& x) const override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Real>>& out) const override;

 private:
  Var<Real> weight_;
  Var<Real> bias_;
  int r_;
  Activation activation_;
  Real slope_;
};

// GDN parameters stored through beta = beta_raw^2 + floor and
// gamma = gamma_raw^2, so any optimizer step keeps them admissible.
template <typename Real>
class Gdn : public Module<Real> {
 public:
  Gdn(std::int64_t channels, bool inverse);

  Var<Real> forward(const Var<Real>& x) const override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Real>>& out) const override;

  Var<Real> beta() const;
  Var<Real> gamma() const;
  Var<Real>& beta_raw() { return beta_raw_; }
  Var<Real>& gamma_raw() { return gamma_raw_; }
  bool inverse() const { return inverse_; }

 private:
  Var<Real> beta_raw_;
  Var<Real> gamma_raw_;
  bool inverse_;
};

// out = branch(x) + shortcut(x), branch = conv_a -> (GDN | LReLU) -> conv_b
// -> LReLU. A null shortcut is the identity.
template <typename Real>
class ResidualUnit : public Module<Real> {
 public:
  ResidualUnit(std::unique_ptr<Module<Real>> conv_a,
               std::unique_ptr<Module<Real>> norm,
               std::unique_ptr<Module<Real>> conv_b,
               std::unique_ptr<Module<Real>> shortcut,
               Real slope = Real(kDefaultLeakySlope));

  Var<Real> forward(const Var<Real>& x) const override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Real>>& out) const override;

  bool has_projection() const { return shortcut_ != nullptr; }

 private:
  std::unique_ptr<Module<Real>> conv_a_;
  std::unique_ptr<Module<Real>> norm_;    // may be null
  std::unique_ptr<Module<Real>> conv_b_;  // may be null (single-conv unit)
  std::unique_ptr<Module<Real>> shortcut_;
  Real slope_;
};

template <typename Real>
class Sequential : public Module<Real> {
 public:
  Sequential() = default;
  void add(std::string name, std::unique_ptr<Module<Real>> module);
  std::size_t size() const { return modules_.size(); }

  Var<Real> forward(const Var<Real>& x) const override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Real>>& out) const override;

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Module<Real>>> modules_;
};

struct KernelStride {
  int kernel = 1;
  int stride = 1;
};

// Receptive field of a conv stack, in input pixels.
int receptive_field(std::span<const KernelStride> stack);

}  // namespace rescomp

#endif  // RESCOMP_LAYERS_HPP_
