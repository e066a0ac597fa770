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

// rescomp: train, encode, decode, evaluate, analyze and rate-control learned
// image codecs.
//
// Exit codes: 0 success, 2 usage, 3 I/O, 4 corrupt bitstream.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rescomp/codec.hpp"
#include "rescomp/complexity.hpp"
#include "rescomp/io_error.hpp"
#include "rescomp/metrics.hpp"
#include "rescomp/ratecontrol.hpp"
#include "rescomp/training.hpp"

namespace fs = std::filesystem;
using namespace rescomp;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitCorrupt = 4;

struct ModelFlags {
  std::string config;
  std::string family;
  int kernel = 0;
  int depth = 0;
  std::string upsampler;
  int bottleneck = 0;
  int channels = 0;
  int stages = 0;
  std::optional<double> lambda;
  std::string distortion;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "model config file (key = value)");
    app.add_option("--family", family, "baseline | hyperprior | resnet");
    app.add_option("--k", kernel, "kernel size for baseline/hyperprior (3, 5, 9)");
    app.add_option("--depth", depth, "3x3 convs per ResNet stage (3 or 4)");
    app.add_option("--upsampler", upsampler, "tconv | subpixel");
    app.add_option("--bottleneck", bottleneck, "latent channels");
    app.add_option("--channels", channels, "main channels");
    app.add_option("--stages", stages, "stride-2 stages in the main encoder");
    app.add_option("--lambda", lambda, "rate-distortion tradeoff");
    app.add_option("--distortion", distortion, "mse | msssim");
  }

  ModelConfig resolve() const {
    ModelConfig c = config.empty() ? ModelConfig{} : load_config_file(config);
    if (!family.empty()) c.family = parse_family(family);
    if (kernel) c.kernel = kernel;
    if (depth) c.depth = depth;
    if (!upsampler.empty()) c.upsampler = parse_upsampler(upsampler);
    if (bottleneck) c.bottleneck = bottleneck;
    if (channels) c.channels = channels;
    if (stages) c.stages = stages;
    if (lambda) c.lambda = *lambda;
    if (!distortion.empty()) c.distortion = parse_distortion(distortion);
    resolve_layers(c);
    return c;
  }
};

// Expands directories to their .ppm files; output is sorted.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
          files.push_back(entry.path().string());
        }
      }
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

int run_analyze(const ModelFlags& flags, const std::string& format, const std::string& layout) {
  const ModelConfig c = flags.resolve();
  TableFormat f;
  if (format == "text") {
    f = TableFormat::kText;
  } else if (format == "csv") {
    f = TableFormat::kCsv;
  } else {
    throw std::invalid_argument("unknown format '" + format + "' (text, csv)");
  }
  TableLayout l;
  if (layout == "grouped") {
    l = TableLayout::kGrouped;
  } else if (layout == "execution") {
    l = TableLayout::kExecution;
  } else {
    throw std::invalid_argument("unknown layout '" + layout + "' (grouped, execution)");
  }
  std::cout << emit_table(model_complexity(c, l), f);
  return 0;
}

struct TrainFlags {
  std::vector<std::string> data;
  int synthetic = 0;
  int synthetic_size = 256;
  std::uint64_t model_seed = 1;
  TrainConfig train;
};

int run_train(const ModelFlags& mflags, const TrainFlags& tflags) {
  const ModelConfig c = mflags.resolve();
  std::vector<Image> images;
  for (const std::string& path : expand_inputs(tflags.data)) images.push_back(read_ppm(path));
  if (tflags.synthetic > 0) {
    auto synth = synthetic_images(tflags.synthetic, tflags.synthetic_size, tflags.synthetic_size,
                                  tflags.train.seed);
    images.insert(images.end(), synth.begin(), synth.end());
  }
  CompressionModel<float> model(c, tflags.model_seed);
  Trainer trainer(model, std::move(images), tflags.train);
  std::cerr << "training " << c.name() << " (" << model.parameter_count() << " parameters)\n";
  const std::vector<TrainRecord> records = trainer.run();
  if (!records.empty()) {
    const TrainRecord& r = records.back();
    std::cout << "iteration " << r.iteration << " J " << r.J << " d " << r.d << " R " << r.R
              << "\n";
  }
  return 0;
}

int run_encode(const std::string& model_path, const std::string& input, const std::string& output,
               int flag) {
  const CompressionModel<float> model = load_checkpoint(model_path);
  const Image image = read_ppm(input);
  const Compressed out = compress(model, image, flag != 0);
  write_file(output, out.file);
  std::cout << std::fixed << std::setprecision(6) << "bpp " << out.bpp(image.width, image.height)
            << " estimated_bits " << std::setprecision(1) << out.stats.information_bits
            << " actual_bits " << 8 * out.file.size() << " clamped " << out.stats.clamped << "\n";
  return 0;
}

int run_decode(const std::string& model_path, const std::string& high_path,
               const std::string& input, const std::string& output) {
  const std::vector<std::uint8_t> file = read_file(input);
  const bool flag = deserialize(file).model_flag;
  if (flag && high_path.empty()) {
    throw std::invalid_argument("stream uses the high-rate model; pass --model-high");
  }
  const CompressionModel<float> model = load_checkpoint(flag ? high_path : model_path);
  write_ppm(output, decompress(model, file).image);
  return 0;
}

int run_eval(const std::string& model_path, const std::string& high_path,
             const std::vector<std::string>& inputs, const std::string& output) {
  std::vector<CompressionModel<float>> models;
  models.push_back(load_checkpoint(model_path));
  if (!high_path.empty()) models.push_back(load_checkpoint(high_path));
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw IoError("cannot write " + output);
  }
  std::ostream& out = output.empty() ? std::cout : file;
  out << "image,model,bpp,psnr,ms_ssim\n" << std::setprecision(8);
  for (const std::string& path : expand_inputs(inputs)) {
    const Image image = read_ppm(path);
    for (std::size_t m = 0; m < models.size(); ++m) {
      const Compressed enc = compress(models[m], image, m == 1);
      const Image rec = decompress(models[m], enc.file).image;
      const bool ssim_ok = std::min(image.width, image.height) >= kMsSsimMinSide;
      out << fs::path(path).filename().string() << ',' << (m == 0 ? "low" : "high") << ','
          << enc.bpp(image.width, image.height) << ',' << psnr(image, rec) << ','
          << (ssim_ok ? ms_ssim(image, rec) : std::numeric_limits<double>::quiet_NaN()) << '\n';
    }
  }
  return 0;
}

int run_select(const std::string& stats_path, double budget, const std::string& output) {
  std::ifstream in(stats_path);
  if (!in) throw IoError("cannot open " + stats_path);
  const std::vector<ImageCandidates> images = parse_stats_csv(in);
  const Selection sel = select_models(images, budget);
  if (!sel.feasible) {
    std::cerr << "warning: no assignment meets the budget of " << budget
              << " bpp; every image stays on the low model\n";
  }
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw IoError("cannot write " + output);
  }
  write_selection_csv(output.empty() ? std::cout : file, images, sel);
  std::cerr << "mean bpp " << sel.mean_rate << " mean ms_ssim " << sel.mean_quality << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rescomp learned image compression toolkit"};
  app.require_subcommand(1);

  ModelFlags mflags;
  std::string format = "text", layout = "grouped";
  CLI::App* analyze = app.add_subcommand("analyze", "print the parameter/FLOPs table");
  mflags.add_to(*analyze);
  analyze->add_option("--format", format, "text | csv");
  analyze->add_option("--layout", layout, "grouped | execution");

  TrainFlags tflags;
  CLI::App* train = app.add_subcommand("train", "rate-distortion training");
  mflags.add_to(*train);
  train->add_option("--data", tflags.data, "PPM files or directories");
  train->add_option("--synthetic", tflags.synthetic, "add this many synthetic images");
  train->add_option("--synthetic-size", tflags.synthetic_size, "side of synthetic images");
  train->add_option("--patch", tflags.train.patch);
  train->add_option("--batch", tflags.train.batch);
  train->add_option("--iterations", tflags.train.iterations);
  train->add_option("--lr", tflags.train.lr);
  train->add_option("--lr-final", tflags.train.lr_final);
  train->add_option("--lr-drop-at", tflags.train.lr_drop_at, "first iteration at --lr-final");
  train->add_option("--aux-lr", tflags.train.aux_lr);
  train->add_option("--seed", tflags.train.seed, "data and noise seed");
  train->add_option("--model-seed", tflags.model_seed, "weight initialization seed");
  train->add_option("--log", tflags.train.log_path, "CSV loss log");
  train->add_option("--log-every", tflags.train.log_every);
  train->add_option("--out", tflags.train.checkpoint_prefix, "checkpoint path prefix")->required();
  train->add_option("--checkpoint-every", tflags.train.checkpoint_every);

  std::string model_path, high_path, input, output;
  int flag = 0;
  CLI::App* encode = app.add_subcommand("encode", "compress one image");
  encode->add_option("--model", model_path, "checkpoint")->required();
  encode->add_option("--input", input, "PPM image")->required();
  encode->add_option("--output", output, "bitstream")->required();
  encode->add_option("--flag", flag, "rate-control model flag")->check(CLI::Range(0, 1));

  CLI::App* decode = app.add_subcommand("decode", "decompress one bitstream");
  decode->add_option("--model", model_path, "checkpoint for flag 0")->required();
  decode->add_option("--model-high", high_path, "checkpoint for flag 1");
  decode->add_option("--input", input, "bitstream")->required();
  decode->add_option("--output", output, "PPM image")->required();

  std::vector<std::string> inputs;
  CLI::App* eval = app.add_subcommand("eval", "encode, decode and score images");
  eval->add_option("--model", model_path, "low-rate checkpoint")->required();
  eval->add_option("--model-high", high_path, "high-rate checkpoint");
  eval->add_option("--input", inputs, "PPM files or directories")->required();
  eval->add_option("--output", output, "stats CSV (default stdout)");

  std::string stats;
  double budget = 0.15;
  CLI::App* select = app.add_subcommand("select", "two-model rate control");
  select->add_option("--stats", stats, "stats CSV from eval")->required();
  select->add_option("--budget", budget, "mean bpp budget");
  select->add_option("--output", output, "selection CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*analyze) return run_analyze(mflags, format, layout);
    if (*train) return run_train(mflags, tflags);
    if (*encode) return run_encode(model_path, input, output, flag);
    if (*decode) return run_decode(model_path, high_path, input, output);
    if (*eval) return run_eval(model_path, high_path, inputs, output);
    if (*select) return run_select(stats, budget, output);
  } catch (const CorruptStreamError& e) {
    std::cerr << "error: corrupt stream: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
