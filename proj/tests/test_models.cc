// tests/test_models.cc

// Copyright 2025  assertkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "assertkit/checkpoint.hpp"
#include "assertkit/models.hpp"
#include "test_util.hpp"

using namespace assertkit;
using namespace assertkit::testutil;
using nn::Tensor;

namespace {

ModelConfig tiny_config(ModelKind kind, std::size_t n_classes, std::size_t input_dim) {
  ModelConfig cfg = ModelConfig::defaults(kind, n_classes, input_dim);
  cfg.units = {2, 2, 2, 2};
  cfg.channels = {2, 2, 4, 4};
  cfg.init_seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("parameter counts stay within 15% of the reported models") {
  struct Expected {
    ModelKind kind;
    std::size_t n_classes;
    std::size_t input_dim;
    double target;  // thousands
  };
  const std::vector<Expected> table = {
      {ModelKind::senet34, 2, 257, 1344.0},
      {ModelKind::senet50, 2, 257, 1094.0},
      {ModelKind::meanstd_resnet, 2, 257, 1389.0},
      {ModelKind::meanstd_resnet, 10, 30, 1390.0},
      {ModelKind::dilated_resnet, 2, 257, 592.0},
      {ModelKind::afn, 2, 257, 599.0},
  };
  for (const Expected& e : table) {
    Model<float> model(ModelConfig::defaults(e.kind, e.n_classes, e.input_dim));
    const double count_k = static_cast<double>(model.parameter_count()) / 1000.0;
    INFO(model_kind_name(e.kind), " n_classes=", e.n_classes, ": ", count_k, "k params");
    CHECK(count_k > 0.85 * e.target);
    CHECK(count_k < 1.15 * e.target);
  }
}

TEST_CASE("table layouts are wired into the defaults") {
  const ModelConfig s34 = ModelConfig::defaults(ModelKind::senet34, 2, 257);
  CHECK(s34.unit == UnitKind::basic);
  CHECK(s34.units == std::vector<std::size_t>{3, 4, 6, 3});
  CHECK(s34.channels == std::vector<std::size_t>{16, 32, 64, 128});

  const ModelConfig s50 = ModelConfig::defaults(ModelKind::senet50, 2, 257);
  CHECK(s50.unit == UnitKind::bottleneck);
  CHECK(s50.units == std::vector<std::size_t>{3, 4, 6, 3});
  CHECK(s50.channels == std::vector<std::size_t>{16, 32, 64, 128});

  const ModelConfig ms = ModelConfig::defaults(ModelKind::meanstd_resnet, 2, 257);
  CHECK(ms.unit == UnitKind::basic);
  CHECK(ms.dilations == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(ms.channels == std::vector<std::size_t>{16, 32, 64, 128});

  const ModelConfig dr = ModelConfig::defaults(ModelKind::dilated_resnet, 2, 257);
  CHECK(dr.units == std::vector<std::size_t>{5, 5, 5, 5});
  CHECK(dr.dilations == std::vector<std::size_t>{2, 4, 4, 8});
  CHECK(dr.channels == std::vector<std::size_t>{8, 16, 32, 64});
}

TEST_CASE("se block") {
  Rng rng(5);
  SUBCASE("excitation pinned to 1 is the identity") {
    auto se = detail::SeBlock<double>::make(4, 16, rng);
    for (double& v : se.fc2.weight.values()) v = 0.0;
    for (double& v : se.fc2.bias.values()) v = 100.0;  // sigmoid(100) == 1.0 in double
    auto x = random_tensor({2, 4, 3, 3}, rng, false);
    auto y = se(x);
    CHECK(y.values() == x.values());
  }
  SUBCASE("squeeze of a per-channel constant input is that constant") {
    auto x = Tensor<double>::zeros({1, 3, 2, 2});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 4; ++i) x.values()[c * 4 + i] = 1.0 + c;
    auto squeeze = nn::global_avg_pool(x);
    CHECK(squeeze.values() == std::vector<double>{1.0, 2.0, 3.0});
  }
  SUBCASE("hand evaluation of a 1x4x2x2 block with set weights") {
    auto se = detail::SeBlock<double>::make(4, 4, rng);  // hidden = 1
    auto x = random_tensor({1, 4, 2, 2}, rng, false);
    // hand computation with the same parameters
    double squeeze[4];
    for (std::size_t c = 0; c < 4; ++c) {
      squeeze[c] = 0.0;
      for (std::size_t i = 0; i < 4; ++i) squeeze[c] += x.values()[c * 4 + i];
      squeeze[c] /= 4.0;
    }
    double hidden = se.fc1.bias.values()[0];
    for (std::size_t c = 0; c < 4; ++c) hidden += se.fc1.weight.values()[c] * squeeze[c];
    hidden = std::max(0.0, hidden);
    auto y = se(x);
    for (std::size_t c = 0; c < 4; ++c) {
      const double pre = se.fc2.weight.values()[c] * hidden + se.fc2.bias.values()[c];
      const double gate = 1.0 / (1.0 + std::exp(-pre));
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(y.values()[c * 4 + i] == doctest::Approx(x.values()[c * 4 + i] * gate));
    }
  }
}

TEST_CASE("senet34 with pinned excitations equals the plain backbone") {
  ModelConfig se_cfg = tiny_config(ModelKind::senet34, 2, 16);
  ModelConfig plain_cfg = tiny_config(ModelKind::meanstd_resnet, 2, 16);
  Rng rng_a(1), rng_b(2);
  auto se_net = detail::Backbone<double>::make(se_cfg, rng_a);
  auto plain = detail::Backbone<double>::make(plain_cfg, rng_b);

  // copy shared weights from the SE network, pin its gates to 1
  nn::NamedParams<double> se_params, plain_params;
  nn::NamedBuffers<double> se_bufs, plain_bufs;
  se_net.collect(se_params, se_bufs);
  plain.collect(plain_params, plain_bufs);
  for (auto& [name, p] : plain_params) {
    for (auto& [se_name, sp] : se_params)
      if (se_name == name) p.values() = sp.values();
  }
  for (auto& [name, p] : se_params) {
    if (name.find(".se.fc2.weight") != std::string::npos)
      for (double& v : p.values()) v = 0.0;
    if (name.find(".se.fc2.bias") != std::string::npos)
      for (double& v : p.values()) v = 100.0;
  }

  Rng rng(7);
  auto x = random_tensor({2, 1, 16, 20}, rng, false);
  auto ya = se_net.forward(x, /*training=*/false, nullptr);
  auto yb = plain.forward(x, /*training=*/false, nullptr);
  REQUIRE(ya.shape() == yb.shape());
  for (std::size_t i = 0; i < ya.numel(); ++i)
    CHECK(ya.values()[i] == doctest::Approx(yb.values()[i]).epsilon(1e-9));
}

TEST_CASE("forward shape contracts") {
  Rng rng(8);
  for (const std::size_t k : {2u, 7u, 10u}) {
    Model<double> model(tiny_config(ModelKind::senet34, k, 16));
    auto x = random_tensor({3, 1, 16, 20}, rng, false);
    auto logits = model.forward_fixed(x, false);
    CHECK(logits.shape() == std::vector<std::size_t>{3, k});
    for (const double v : logits.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("duplicated utterance gives identical rows in inference mode") {
  Model<double> model(tiny_config(ModelKind::senet34, 2, 16));
  Rng rng(9);
  auto one = random_tensor({1, 1, 16, 20}, rng, false);
  std::vector<double> twice = one.values();
  twice.insert(twice.end(), one.values().begin(), one.values().end());
  auto batch = Tensor<double>::from_values({2, 1, 16, 20}, std::move(twice));
  auto logits = model.forward_fixed(batch, false);
  CHECK(logits.values()[0] == logits.values()[2]);
  CHECK(logits.values()[1] == logits.values()[3]);
}

TEST_CASE("afn mask matches the input shape and stays inside (0,1)") {
  ModelConfig cfg = tiny_config(ModelKind::afn, 2, 257);
  Model<double> model(cfg);
  Rng rng(10);
  auto x = random_tensor({1, 1, 257, 400}, rng, false, 0.5);
  auto mask = model.afn_mask(x, false);
  CHECK(mask.shape() == std::vector<std::size_t>{1, 1, 257, 400});
  for (const double v : mask.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("dilation 1 reproduces the standard conv shape chain") {
  ModelConfig dil = tiny_config(ModelKind::dilated_resnet, 2, 32);
  dil.dilations = {2, 4, 4, 8};
  ModelConfig plain = dil;
  plain.dilations = {1, 1, 1, 1};
  Model<double> a(dil), b(plain);
  Rng rng(11);
  auto x = random_tensor({1, 1, 32, 48}, rng, false);
  CHECK(a.forward_fixed(x, false).shape() == b.forward_fixed(x, false).shape());
}

TEST_CASE("mean-std model ignores extra zero padding at inference") {
  ModelConfig cfg = tiny_config(ModelKind::meanstd_resnet, 2, 12);
  Model<float> model(cfg);
  Rng rng(12);
  const std::size_t t = 23;
  std::vector<float> base(12 * t);
  for (float& v : base) v = static_cast<float>(rng.normal());

  auto make_padded = [&](std::size_t pad) {
    std::vector<float> img(12 * (t + pad), 0.0f);
    for (std::size_t d = 0; d < 12; ++d)
      for (std::size_t r = 0; r < t; ++r) img[d * (t + pad) + r] = base[d * t + r];
    return Tensor<float>::from_values({1, 1, 12, t + pad}, std::move(img));
  };

  auto a = model.forward_whole(make_padded(0), {t}, false);
  auto b = model.forward_whole(make_padded(7), {t}, false);
  REQUIRE(a.numel() == b.numel());
  for (std::size_t i = 0; i < a.numel(); ++i)
    CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-5);
}

TEST_CASE("end-to-end gradients on tiny configs") {
  Rng rng(13);
  const double tol = 1e-3;
  for (const ModelKind kind :
       {ModelKind::senet34, ModelKind::senet50, ModelKind::meanstd_resnet,
        ModelKind::dilated_resnet, ModelKind::afn}) {
    CAPTURE(model_kind_name(kind));
    Model<double> model(tiny_config(kind, 2, 16));
    auto x = random_tensor({2, 1, 16, 18}, rng, true, 0.5);
    const std::vector<std::size_t> labels = {0, 1};
    const std::vector<std::size_t> valid = {14, 18};

    auto loss_fn = [&]() {
      auto logits = kind == ModelKind::meanstd_resnet
                        ? model.forward_whole(x, valid, true)
                        : model.forward_fixed(x, true);
      return nn::cross_entropy(logits, labels);
    };

    // finite differences over the input and a few representative parameters
    std::vector<Tensor<double>> checked = {x};
    for (auto& [name, p] : model.parameters()) {
      if (name == "stem.conv.weight" || name == "head.weight" || name == "head.bias" ||
          name == "block1.unit0.bn1.gamma")
        checked.push_back(p);
    }
    // h = 1e-6 keeps the probability of crossing a relu/maxpool kink during
    // the perturbation negligible; truncation stays ~1e-12 in double
    const double err = gradcheck(checked, loss_fn, 1e-6);
    INFO(model_kind_name(kind), " max rel err ", err);
    CHECK(err < tol);
  }
}

TEST_CASE("checkpoint save/load reproduces logits bit-exactly") {
  ModelConfig cfg = tiny_config(ModelKind::senet34, 2, 16);
  Model<float> model(cfg);
  Rng rng(14);
  std::vector<float> img(2 * 16 * 20);
  for (float& v : img) v = static_cast<float>(rng.normal());
  auto x = Tensor<float>::from_values({2, 1, 16, 20}, img);

  auto before = model.forward_fixed(x, false);
  CheckpointMeta meta;
  meta.epoch = 3;
  meta.selection = "dev_eer";
  meta.selection_value = 0.0125;
  const Snapshot snap = snapshot_model(model, meta);
  const std::string path =
      (std::filesystem::temp_directory_path() / "assertkit_ckpt_test.ckpt").string();
  save_checkpoint(path, snap);
  const Snapshot loaded = load_checkpoint(path);
  CHECK(loaded.meta.epoch == 3);
  CHECK(loaded.meta.selection == "dev_eer");
  CHECK(loaded.meta.selection_value == doctest::Approx(0.0125));
  CHECK(loaded.config.kind == ModelKind::senet34);

  auto restored = model_from_snapshot(loaded);
  auto after = restored->forward_fixed(Tensor<float>::from_values({2, 1, 16, 20}, img), false);
  REQUIRE(after.numel() == before.numel());
  for (std::size_t i = 0; i < after.numel(); ++i)
    CHECK(after.values()[i] == before.values()[i]);  // bitwise
}
