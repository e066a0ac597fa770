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

// Parameter and FLOPs accounting over LayerSpecs. A conv-like layer with a
// kernel of h x w costs Para = (h*w*C_in + bias) * C_out parameters and
// Para * H' * W' FLOPs at an H' x W' output. GDN and the factorized prior
// contribute parameters only.

#ifndef RESCOMP_COMPLEXITY_HPP_
#define RESCOMP_COMPLEXITY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "rescomp/models.hpp"

namespace rescomp {

struct ComplexityRow {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int kernel = 0;
  int c_in = 0;
  int c_out = 0;
  std::int64_t out_h = 0;
  std::int64_t out_w = 0;
  std::int64_t params = 0;
  std::int64_t flops = 0;
  bool counts_flops = true;
};

struct ComplexityReport {
  std::string model;
  std::vector<ComplexityRow> rows;
  std::int64_t total_params = 0;
  std::int64_t total_flops = 0;
  double relative = 0.0;  // total_flops over the reference model's
};

// kGrouped merges every GDN/IGDN into one row after the main encoder and drops
// parameter-free rows; kExecution lists layers in run order.
enum class TableLayout { kGrouped, kExecution };
enum class TableFormat { kText, kCsv };

// Throws std::invalid_argument when the output size is unresolved.
ComplexityRow layer_complexity(const LayerSpec& spec);

// Relative cost is measured against Baseline-5 at the same reference size.
ComplexityReport model_complexity(const ModelConfig& config,
                                  TableLayout layout = TableLayout::kGrouped);

// Three significant digits, e.g. 5.12e8.
std::string format_sci3(double value);

std::string emit_table(const ComplexityReport& report, TableFormat format);

}  // namespace rescomp

#endif  // RESCOMP_COMPLEXITY_HPP_
