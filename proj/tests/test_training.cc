// tests/test_training.cc

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
#include <limits>

#include "assertkit/training.hpp"

using namespace assertkit;

namespace {

ModelConfig tiny_model(std::size_t n_classes) {
  ModelConfig cfg = ModelConfig::defaults(ModelKind::senet34, n_classes, 16);
  cfg.units = {1, 1, 1, 1};
  cfg.channels = {2, 2, 4, 4};
  cfg.init_seed = 5;
  return cfg;
}

// Separable two-class features: bonafide shifted up, spoof shifted down.
std::vector<TrainUtt> toy_data(std::size_t n, std::uint64_t seed, const LabelSpace& space) {
  Rng rng(seed);
  std::vector<TrainUtt> data;
  for (std::size_t i = 0; i < n; ++i) {
    const bool bona = i % 4 == 0;
    TrainUtt u;
    u.utt_id = "u" + std::to_string(seed) + "_" + std::to_string(i);
    u.bonafide = bona;
    u.label = bona ? space.bonafide_index : 0;
    u.feat.rows = 24 + rng.below(17);
    u.feat.cols = 16;
    u.feat.kind = FeatureKind::logspec;
    u.feat.data.resize(u.feat.rows * 16);
    const double shift = bona ? 1.0 : -1.0;
    for (float& v : u.feat.data) v = static_cast<float>(shift + 0.5 * rng.normal());
    data.push_back(std::move(u));
  }
  return data;
}

TrainConfig toy_train_config() {
  TrainConfig cfg;
  cfg.objective = Objective::binary;
  cfg.selection = Selection::dev_eer;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.segmenter = {32, 16};
  cfg.seed = 11;
  cfg.optimizer.peak_lr = 3e-3;
  cfg.optimizer.warmup_steps = 20;
  return cfg;
}

}  // namespace

TEST_CASE("label spaces follow the published layouts") {
  const LabelSpace pa = LabelSpace::make(CorpusMode::PA, Objective::multiclass);
  CHECK(pa.labels == std::vector<std::string>{"bonafide", "AA", "AB", "AC", "BA", "BB",
                                              "BC", "CA", "CB", "CC"});
  CHECK(pa.size() == 10);
  CHECK(pa.bonafide_index == 0);

  const LabelSpace la = LabelSpace::make(CorpusMode::LA, Objective::multiclass);
  CHECK(la.labels == std::vector<std::string>{"bonafide", "SS_1", "SS_2", "SS_4", "US_1",
                                              "VC_1", "VC_4"});
  CHECK(la.size() == 7);

  const LabelSpace binary = LabelSpace::make(CorpusMode::PA, Objective::binary);
  CHECK(binary.labels == std::vector<std::string>{"spoof", "bonafide"});
  CHECK(binary.bonafide_index == 1);
}

TEST_CASE("make_labels maps ids and rejects unknown systems") {
  Protocol p = parse_protocol(
      "S01 a - - bonafide\n"
      "S01 b - AA spoof\n"
      "S02 c - CC spoof\n");
  const LabelSpace pa = LabelSpace::make(CorpusMode::PA, Objective::multiclass);
  const auto labels = make_labels(p, pa);
  CHECK(labels.at("a") == 0);
  CHECK(labels.at("b") == 1);  // AA is the first attack id
  CHECK(labels.at("c") == 9);

  const LabelSpace binary = LabelSpace::make(CorpusMode::PA, Objective::binary);
  const auto blabels = make_labels(p, binary);
  CHECK(blabels.at("a") == 1);
  CHECK(blabels.at("b") == 0);

  Protocol bad = parse_protocol("S01 x - ZZ spoof\n");
  const LabelSpace la = LabelSpace::make(CorpusMode::LA, Objective::multiclass);
  CHECK_THROWS_WITH_AS(make_labels(bad, la), doctest::Contains("unknown system_id"), Error);
}

TEST_CASE("training runs, selects the best epoch, and is reproducible") {
  const LabelSpace space = LabelSpace::make(CorpusMode::PA, Objective::binary);
  const std::vector<TrainUtt> train_data = toy_data(32, 1, space);
  const std::vector<TrainUtt> dev_data = toy_data(16, 2, space);
  const TrainConfig cfg = toy_train_config();

  Model<float> model_a(tiny_model(2));
  const TrainResult a = train(model_a, train_data, dev_data, space, cfg);
  REQUIRE(a.reports.size() == cfg.epochs);

  // selection is the argmin of dev EER with ties to the earliest epoch
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < a.reports.size(); ++i)
    if (a.reports[i].dev_eer < a.reports[argmin].dev_eer) argmin = i;
  std::size_t selected = 0;
  for (std::size_t i = 0; i < a.reports.size(); ++i)
    if (a.reports[i].selected) selected = i;
  CHECK(a.reports[selected].dev_eer == a.reports[argmin].dev_eer);
  CHECK(a.best.meta.epoch == selected + 1);
  CHECK(a.best.meta.selection == "dev_eer");

  // learning-rate trace matches the schedule at the logged steps
  std::size_t pool = 0;
  for (const TrainUtt& u : train_data) {
    const std::size_t extended = (u.feat.rows + 31) / 32 * 32;
    pool += (extended - 32) / 16 + 1;
  }
  const std::size_t batches = (pool + cfg.batch_size - 1) / cfg.batch_size;
  for (std::size_t e = 0; e < a.reports.size(); ++e)
    CHECK(a.reports[e].lr == nn::noam_lr((e + 1) * batches, cfg.optimizer));

  // bit-identical re-run
  Model<float> model_b(tiny_model(2));
  const TrainResult b = train(model_b, train_data, dev_data, space, cfg);
  REQUIRE(b.reports.size() == a.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i)
    CHECK(format_epoch_report(a.reports[i]) == format_epoch_report(b.reports[i]));
  REQUIRE(a.best.params.size() == b.best.params.size());
  for (std::size_t i = 0; i < a.best.params.size(); ++i)
    CHECK(a.best.params[i].second == b.best.params[i].second);
}

TEST_CASE("dev accuracy selection takes the argmax epoch") {
  const LabelSpace space = LabelSpace::make(CorpusMode::PA, Objective::binary);
  const std::vector<TrainUtt> train_data = toy_data(24, 3, space);
  const std::vector<TrainUtt> dev_data = toy_data(12, 4, space);
  TrainConfig cfg = toy_train_config();
  cfg.selection = Selection::dev_acc;
  cfg.epochs = 2;

  Model<float> model(tiny_model(2));
  const TrainResult r = train(model, train_data, dev_data, space, cfg);
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < r.reports.size(); ++i)
    if (r.reports[i].dev_acc > r.reports[argmax].dev_acc) argmax = i;
  CHECK(r.reports[argmax].selected);
  CHECK(r.best.meta.selection == "dev_acc");
}

TEST_CASE("loss on a frozen model equals the loss from its checkpoint") {
  const LabelSpace space = LabelSpace::make(CorpusMode::PA, Objective::binary);
  const std::vector<TrainUtt> train_data = toy_data(16, 5, space);
  const std::vector<TrainUtt> dev_data = toy_data(8, 6, space);
  TrainConfig cfg = toy_train_config();
  cfg.epochs = 1;

  Model<float> model(tiny_model(2));
  const TrainResult r = train(model, train_data, dev_data, space, cfg);
  auto restored = model_from_snapshot(r.best);

  // same fixed batch through both models in inference mode
  Rng rng(31);
  std::vector<float> img(2 * 16 * 32);
  for (float& v : img) v = static_cast<float>(rng.normal());
  auto x1 = nn::Tensor<float>::from_values({2, 1, 16, 32}, img);
  auto x2 = nn::Tensor<float>::from_values({2, 1, 16, 32}, img);
  const std::vector<std::size_t> labels = {0, 1};

  // the trained model may have moved past the snapshotted epoch; restore it
  restore_model(model, r.best);
  auto l1 = nn::cross_entropy(model.forward_fixed(x1, false), labels);
  auto l2 = nn::cross_entropy(restored->forward_fixed(x2, false), labels);
  CHECK(l1.item() == l2.item());  // bit-exact
}

TEST_CASE("divergence aborts with a diagnostic") {
  const LabelSpace space = LabelSpace::make(CorpusMode::PA, Objective::binary);
  const std::vector<TrainUtt> train_data = toy_data(16, 7, space);
  const std::vector<TrainUtt> dev_data = toy_data(8, 8, space);
  TrainConfig cfg = toy_train_config();
  cfg.optimizer.peak_lr = std::numeric_limits<double>::infinity();

  Model<float> model(tiny_model(2));
  CHECK_THROWS_WITH_AS(train(model, train_data, dev_data, space, cfg),
                       doctest::Contains("diverged"), Error);
}

TEST_CASE("whole-utterance training path runs and is reproducible") {
  const LabelSpace space = LabelSpace::make(CorpusMode::PA, Objective::binary);
  const std::vector<TrainUtt> train_data = toy_data(20, 9, space);
  const std::vector<TrainUtt> dev_data = toy_data(10, 10, space);
  TrainConfig cfg = toy_train_config();
  cfg.epochs = 2;
  cfg.batch_size = 4;

  ModelConfig mcfg = ModelConfig::defaults(ModelKind::meanstd_resnet, 2, 16);
  mcfg.units = {1, 1, 1, 1};
  mcfg.channels = {2, 2, 4, 4};
  mcfg.init_seed = 5;

  Model<float> a(mcfg), b(mcfg);
  const TrainResult ra = train(a, train_data, dev_data, space, cfg);
  const TrainResult rb = train(b, train_data, dev_data, space, cfg);
  REQUIRE(ra.reports.size() == 2);
  for (std::size_t i = 0; i < ra.reports.size(); ++i)
    CHECK(format_epoch_report(ra.reports[i]) == format_epoch_report(rb.reports[i]));
}

TEST_CASE("epoch log format") {
  EpochReport r;
  r.epoch = 2;
  r.train_loss = 0.5;
  r.dev_eer = 0.05;
  r.dev_acc = 0.96875;
  r.lr = 0.000625;
  r.selected = true;
  CHECK(format_epoch_report(r) ==
        "epoch=2 loss=0.500000 dev_eer=0.050000 dev_acc=0.968750 lr=0.00062500 selected=1");
}
