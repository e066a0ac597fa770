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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "rescomp/codec.hpp"
#include "rescomp/metrics.hpp"
#include "rescomp/training.hpp"
#include "support/grad_cases.hpp"

namespace rescomp {
namespace {

using testing::random_tensor;

ModelConfig tiny_config(double lambda = 100.0) {
  ModelConfig c;
  c.family = Family::kHyperPrior;
  c.kernel = 3;
  c.channels = 8;
  c.bottleneck = 8;
  c.stages = 2;
  c.lambda = lambda;
  resolve_layers(c);
  return c;
}

TrainConfig tiny_train(std::int64_t iterations) {
  TrainConfig t;
  t.patch = 32;
  t.batch = 2;
  t.iterations = iterations;
  t.lr = 1e-3;
  t.seed = 9;
  return t;
}

TEST_CASE("rd loss identities") {
  std::mt19937_64 rng(1);
  const Var<double> x(random_tensor({2, 3, 4, 5}, rng, 0.0, 1.0));
  const Var<double> zero(Tensor<double>::scalar(0.0));
  const RdLoss<double> same = rd_loss(x, x, zero, 0.015, Distortion::kMse, 40);
  CHECK(same.J.value().item() == 0.0);

  const Var<double> y(random_tensor({2, 3, 4, 5}, rng, 0.0, 1.0));
  const Var<double> bits(Tensor<double>::scalar(123.0));
  const RdLoss<double> free = rd_loss(x, y, bits, 0.0, Distortion::kMse, 40);
  CHECK(free.J.value().item() == doctest::Approx(123.0 / 40));

  double sq = 0.0;
  for (std::int64_t i = 0; i < x.value().numel(); ++i) {
    sq += (x.value()[i] - y.value()[i]) * (x.value()[i] - y.value()[i]);
  }
  const RdLoss<double> l = rd_loss(x, y, bits, 0.015, Distortion::kMse, 40);
  CHECK(l.lambda == 0.015);
  CHECK(l.d.value().item() == doctest::Approx(sq / 120));
  CHECK(l.R.value().item() == doctest::Approx(123.0 / 40));
  CHECK(l.J.value().item() == doctest::Approx(0.015 * l.d.value().item() + l.R.value().item()));

  CHECK_THROWS_AS(rd_loss(x, constant(Tensor<double>(Shape{1, 3, 4, 5})), bits, 1.0, Distortion::kMse, 40),
                  std::invalid_argument);
  CHECK_THROWS_AS(rd_loss(x, y, bits, 1.0, Distortion::kMse, 0), std::invalid_argument);
}

TEST_CASE("rd loss with ms-ssim distortion") {
  std::mt19937_64 rng(2);
  const Var<double> x(random_tensor({1, 3, 176, 176}, rng, 0.0, 1.0));
  const Var<double> y(random_tensor({1, 3, 176, 176}, rng, 0.0, 1.0));
  const RdLoss<double> l = rd_loss(x, y, constant(Tensor<double>::scalar(0.0)), 2.0,
                                   Distortion::kMsSsim, 176 * 176);
  CHECK(l.d.value().item() == doctest::Approx(1.0 - ms_ssim(x, y, 1.0).value().item()));
  CHECK(l.J.value().item() == doctest::Approx(2.0 * l.d.value().item()));
}

TEST_CASE("rd loss gradients") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CHECK(testing::rd_loss_case(seed, Distortion::kMse) < 1e-4);
  }
  CHECK(testing::rd_loss_case(0, Distortion::kMsSsim) < 1e-4);
}

TEST_CASE("gradient of the training objective through a tiny model") {
  ModelConfig c = tiny_config(50.0);
  c.channels = 4;
  c.bottleneck = 4;
  resolve_layers(c);
  const CompressionModel<double> model(c, 3);
  std::mt19937_64 data(4);
  const Var<double> x(random_tensor({1, 3, 16, 16}, data, 0.0, 1.0));
  const auto objective = [&] {
    std::mt19937_64 noise(5);
    const ForwardResult<double> f = model.forward(x, QuantMode::kTrain, noise);
    return rd_loss(x, f.x_hat, add(f.y_bits, f.z_bits), c.lambda, Distortion::kMse, 256).J;
  };
  std::vector<Var<double>> params = model.model_parameters();
  std::mt19937_64 pick(6);
  std::shuffle(params.begin(), params.end(), pick);
  params.resize(8);
  CHECK(testing::gradient_error(params, objective, pick, 6, 1e-6) < 1e-3);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.iterations = 100;
  CHECK_NOTHROW(t.validate());
  t.lr_drop_at = 100;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.lr_drop_at = 80;
  CHECK_NOTHROW(t.validate());
  t.batch = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.batch = 8;
  t.patch = -1;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("trainer rejects bad datasets") {
  CompressionModel<float> model(tiny_config(), 1);
  CHECK_THROWS_AS(Trainer(model, {}, tiny_train(1)), std::invalid_argument);
  CHECK_THROWS_AS(Trainer(model, synthetic_images(2, 31, 64, 1), tiny_train(1)), std::invalid_argument);
  TrainConfig odd = tiny_train(1);
  odd.patch = 24;
  CHECK_THROWS_AS(Trainer(model, synthetic_images(2, 64, 64, 1), odd), std::invalid_argument);
}

TEST_CASE("same seed gives the same first step") {
  const auto first_step = [] {
    CompressionModel<float> model(tiny_config(), 7);
    Trainer t(model, synthetic_images(4, 48, 48, 2), tiny_train(1));
    return t.step();
  };
  const TrainRecord a = first_step(), b = first_step();
  CHECK(a.J == b.J);
  CHECK(a.d == b.d);
  CHECK(a.R == b.R);
}

TEST_CASE("learning rate drop, log and checkpoints") {
  const auto dir = std::filesystem::temp_directory_path() / "rescomp_training_test";
  std::filesystem::create_directories(dir);
  CompressionModel<float> model(tiny_config(), 8);
  TrainConfig t = tiny_train(6);
  t.lr_drop_at = 4;
  t.lr_final = 1e-4;
  t.log_path = (dir / "log.csv").string();
  t.checkpoint_prefix = (dir / "ckpt").string();
  t.checkpoint_every = 3;
  Trainer trainer(model, synthetic_images(4, 40, 40, 3), t);
  CHECK(trainer.lr_at(3) == 1e-3);
  CHECK(trainer.lr_at(4) == 1e-4);
  const std::vector<TrainRecord> records = trainer.run();
  REQUIRE(records.size() == 6);
  CHECK(records[3].lr == 1e-3);
  CHECK(records[4].lr == 1e-4);
  for (const TrainRecord& r : records) CHECK(r.J == model.config().lambda * r.d + r.R);

  std::ifstream log(t.log_path);
  std::string line;
  std::getline(log, line);
  CHECK(line == "iteration,J,d,R,lr");
  int rows = 0;
  while (std::getline(log, line)) {
    std::istringstream fields(line);
    std::string f;
    std::vector<double> v;
    while (std::getline(fields, f, ',')) v.push_back(std::stod(f));
    REQUIRE(v.size() == 5);
    CHECK(v[1] == doctest::Approx(model.config().lambda * v[2] + v[3]).epsilon(1e-8));
    ++rows;
  }
  CHECK(rows == 6);
  for (const char* name : {"ckpt_3.rckp", "ckpt_6.rckp", "ckpt_final.rckp"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  std::uint64_t step = 0;
  load_checkpoint((dir / "ckpt_final.rckp").string(), &step);
  CHECK(step == 6);
  CHECK(prior_cdf_monotone(model.prior()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic images are deterministic") {
  const auto a = synthetic_images(3, 20, 10, 5), b = synthetic_images(3, 20, 10, 5);
  REQUIRE(a.size() == 3);
  CHECK(a[0].width == 20);
  CHECK(a[0].height == 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].rgb == b[i].rgb);
  CHECK(a[0].rgb != a[1].rgb);
  CHECK(synthetic_images(1, 20, 10, 6)[0].rgb != a[0].rgb);
}

}  // namespace
}  // namespace rescomp
