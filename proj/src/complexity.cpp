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

#include "rescomp/complexity.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "rescomp/layers.hpp"

namespace rescomp {
namespace {

bool is_norm(LayerKind k) { return k == LayerKind::kGdn || k == LayerKind::kIgdn; }

std::int64_t flops_of(const ComplexityReport& r) {
  std::int64_t total = 0;
  for (const auto& row : r.rows) total += row.flops;
  return total;
}

ComplexityReport tally(const ModelConfig& config, TableLayout layout) {
  ComplexityReport report;
  report.model = config.name();
  ComplexityRow merged_norm{"GDN/IGDN", LayerKind::kGdn};
  merged_norm.counts_flops = false;
  bool norm_seen = false;
  std::size_t norm_slot = 0;
  for (const LayerSpec& spec : config.layers) {
    ComplexityRow row = layer_complexity(spec);
    report.total_params += row.params;
    report.total_flops += row.flops;
    if (layout == TableLayout::kExecution) {
      report.rows.push_back(std::move(row));
      continue;
    }
    if (is_norm(spec.kind)) {
      merged_norm.params += row.params;
      merged_norm.c_in = merged_norm.c_out = spec.c_out;
      norm_seen = true;
      continue;
    }
    if (spec.kind == LayerKind::kQuantizer) continue;
    report.rows.push_back(std::move(row));
    if (spec.section == Section::kEncoder) norm_slot = report.rows.size();
  }
  if (norm_seen) {
    report.rows.insert(report.rows.begin() + static_cast<std::ptrdiff_t>(norm_slot),
                       merged_norm);
  }
  return report;
}

}  // namespace

ComplexityRow layer_complexity(const LayerSpec& spec) {
  if (spec.out_h <= 0 || spec.out_w <= 0) {
    throw std::invalid_argument("layer_complexity: output size of " + spec.name +
                                " is unresolved");
  }
  ComplexityRow row;
  row.name = spec.name;
  row.kind = spec.kind;
  row.kernel = spec.kernel;
  row.c_in = spec.c_in;
  row.c_out = spec.c_out;
  row.out_h = spec.out_h;
  row.out_w = spec.out_w;
  switch (spec.kind) {
    case LayerKind::kConv:
    case LayerKind::kTConv:
    case LayerKind::kSubpixel:
    case LayerKind::kDense1x1:
      row.params = (std::int64_t{spec.kernel} * spec.kernel * spec.c_in +
                    (spec.has_bias ? 1 : 0)) *
                   spec.c_out;
      row.flops = row.params * spec.out_h * spec.out_w;
      break;
    case LayerKind::kGdn:
    case LayerKind::kIgdn:
      row.params = gdn_param_count(spec.c_out);
      row.counts_flops = false;
      break;
    case LayerKind::kFactorizedPrior:
      row.params = factorized_prior_param_count(spec.c_out);
      row.counts_flops = false;
      break;
    case LayerKind::kQuantizer:
      row.counts_flops = false;
      break;
  }
  return row;
}

ComplexityReport model_complexity(const ModelConfig& config, TableLayout layout) {
  ComplexityReport report = tally(config, layout);
  ModelConfig reference = build_baseline(5);
  reference.reference_size = config.reference_size;
  resolve_layers(reference);
  report.relative = static_cast<double>(report.total_flops) /
                    static_cast<double>(flops_of(tally(reference, TableLayout::kExecution)));
  return report;
}

std::string format_sci3(double value) {
  if (value == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", value);
  std::string s(buf);
  const auto e = s.find('e');
  const int exponent = std::stoi(s.substr(e + 1));
  return s.substr(0, e) + "e" + std::to_string(exponent);
}

std::string emit_table(const ComplexityReport& report, TableFormat format) {
  std::ostringstream os;
  auto kernel_of = [](const ComplexityRow& r) {
    if (r.kind == LayerKind::kGdn || r.kind == LayerKind::kIgdn ||
        r.kind == LayerKind::kFactorizedPrior || r.kind == LayerKind::kQuantizer) {
      return std::string("-");
    }
    return std::to_string(r.kernel) + "x" + std::to_string(r.kernel);
  };
  auto flops_of_row = [](const ComplexityRow& r) {
    return r.counts_flops ? format_sci3(static_cast<double>(r.flops)) : std::string("-");
  };
  if (format == TableFormat::kCsv) {
    os << "layer,kernel,c_in,c_out,out_h,out_w,params,flops\n";
    for (const auto& r : report.rows) {
      os << r.name << ',' << kernel_of(r) << ',' << r.c_in << ',' << r.c_out << ','
         << r.out_h << ',' << r.out_w << ',' << r.params << ','
         << (r.counts_flops ? std::to_string(r.flops) : std::string()) << '\n';
    }
    if (!report.rows.empty()) {
      os << "Total,,,,,," << report.total_params << ',' << report.total_flops << '\n';
    }
    return os.str();
  }
  os << std::left << std::setw(18) << "Layer" << std::setw(8) << "Kernel"
     << std::right << std::setw(6) << "C_in" << std::setw(7) << "C_out"
     << std::setw(11) << "Output" << std::setw(12) << "Para" << std::setw(11)
     << "FLOPs" << '\n';
  for (const auto& r : report.rows) {
    const std::string out = r.counts_flops || r.kind == LayerKind::kFactorizedPrior
                                ? std::to_string(r.out_h) + "x" + std::to_string(r.out_w)
                                : std::string("-");
    os << std::left << std::setw(18) << r.name << std::setw(8) << kernel_of(r)
       << std::right << std::setw(6) << r.c_in << std::setw(7) << r.c_out
       << std::setw(11) << out << std::setw(12) << r.params << std::setw(11)
       << flops_of_row(r) << '\n';
  }
  if (!report.rows.empty()) {
    std::ostringstream rel;
    rel << std::fixed << std::setprecision(2) << report.relative;
    os << std::left << std::setw(50) << "Total" << std::right << std::setw(12)
       << report.total_params << std::setw(11)
       << format_sci3(static_cast<double>(report.total_flops)) << '\n'
       << "Relative FLOPs (vs Baseline-5): " << rel.str() << '\n';
  }
  return os.str();
}

}  // namespace rescomp
