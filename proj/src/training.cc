// src/training.cc

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

#include "assertkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace assertkit {

LabelSpace LabelSpace::make(CorpusMode mode, Objective objective) {
  LabelSpace space;
  space.mode = mode;
  space.objective = objective;
  if (objective == Objective::binary) {
    space.labels = {"spoof", "bonafide"};
    space.bonafide_index = 1;
  } else {
    space.labels = {"bonafide"};
    for (const std::string& cls : spoof_class_ids(mode)) space.labels.push_back(cls);
    space.bonafide_index = 0;
  }
  return space;
}

std::unordered_map<std::string, std::size_t> make_labels(const Protocol& protocol,
                                                         const LabelSpace& space) {
  std::unordered_map<std::string, std::size_t> out;
  out.reserve(protocol.size());
  for (const TrialEntry& e : protocol) {
    std::size_t label;
    if (e.key == TrialKey::bonafide) {
      label = space.bonafide_index;
    } else if (space.objective == Objective::binary) {
      label = 0;
    } else {
      const auto it = std::find(space.labels.begin(), space.labels.end(), e.system_id);
      check(it != space.labels.end(), "unknown system_id '", e.system_id,
            "' for utt '", e.utt_id, "' in the ",
            space.mode == CorpusMode::PA ? "PA" : "LA", " multi-class label space");
      label = static_cast<std::size_t>(it - space.labels.begin());
    }
    out.emplace(e.utt_id, label);
  }
  return out;
}

std::vector<TrainUtt> assemble_data(const Protocol& protocol, const std::string& features_dir,
                                    const LabelSpace& space) {
  const auto labels = make_labels(protocol, space);
  std::vector<TrainUtt> data(protocol.size());
  parallel_for(protocol.size(), [&](std::size_t i) {
    const TrialEntry& e = protocol[i];
    TrainUtt u;
    u.utt_id = e.utt_id;
    u.feat = load_feature(features_dir + "/" + e.utt_id + ".feat");
    u.label = labels.at(e.utt_id);
    u.bonafide = e.key == TrialKey::bonafide;
    data[i] = std::move(u);
  });
  return data;
}

namespace {

// (utterance, segment offset) descriptor; segments are materialized lazily
// with the same cyclic-tiling rule as unify_and_segment.
struct SegRef {
  std::size_t utt = 0;
  std::size_t offset = 0;
};

std::vector<SegRef> build_segment_pool(const std::vector<TrainUtt>& data,
                                       const SegmenterConfig& seg) {
  const std::size_t m = seg.frames_per_segment;
  const std::size_t l = seg.overlap;
  check(m > 0 && l < m && m % (m - l) == 0, "segmenter: invalid (M, L)");
  std::vector<SegRef> pool;
  for (std::size_t ui = 0; ui < data.size(); ++ui) {
    const std::size_t t = data[ui].feat.rows;
    check(t >= 1, "empty feature matrix for ", data[ui].utt_id);
    const std::size_t extended = (t + m - 1) / m * m;
    for (std::size_t off = 0; off + m <= extended; off += m - l)
      pool.push_back({ui, off});
  }
  return pool;
}

// Writes one segment as a 1 x D x M image plane at dst.
void fill_segment_image(float* dst, const FeatureMatrix& feat, std::size_t offset,
                        std::size_t m) {
  const std::size_t t = feat.rows, d = feat.cols;
  for (std::size_t r = 0; r < m; ++r) {
    const float* src = feat.data.data() + ((offset + r) % t) * d;
    for (std::size_t k = 0; k < d; ++k) dst[k * m + r] = src[k];
  }
}

nn::Tensor<float> batch_from_segments(const std::vector<TrainUtt>& data,
                                      const std::vector<SegRef>& pool,
                                      const std::vector<std::size_t>& idx, std::size_t lo,
                                      std::size_t hi, std::size_t m,
                                      std::vector<std::size_t>* labels) {
  const std::size_t n = hi - lo;
  const std::size_t d = data[pool[idx[lo]].utt].feat.cols;
  std::vector<float> values(n * d * m);
  labels->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SegRef& ref = pool[idx[lo + i]];
    fill_segment_image(values.data() + i * d * m, data[ref.utt].feat, ref.offset, m);
    (*labels)[i] = data[ref.utt].label;
  }
  return nn::Tensor<float>::from_values({n, 1, d, m}, std::move(values));
}

// Whole-utterance batches: utterances sorted by length into consecutive
// batches (bounding padding waste); the batch order is shuffled per epoch.
nn::Tensor<float> batch_from_whole(const std::vector<TrainUtt>& data,
                                   const std::vector<std::size_t>& utts,
                                   std::vector<std::size_t>* valid,
                                   std::vector<std::size_t>* labels) {
  const std::size_t n = utts.size();
  const std::size_t d = data[utts[0]].feat.cols;
  std::size_t t_max = 0;
  for (const std::size_t u : utts) t_max = std::max(t_max, data[u].feat.rows);
  std::vector<float> values(n * d * t_max, 0.0f);
  valid->resize(n);
  labels->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureMatrix& f = data[utts[i]].feat;
    check(f.cols == d, "mixed feature dimensions in batch");
    float* img = values.data() + i * d * t_max;
    for (std::size_t r = 0; r < f.rows; ++r)
      for (std::size_t k = 0; k < f.cols; ++k) img[k * t_max + r] = f.at(r, k);
    (*valid)[i] = f.rows;
    (*labels)[i] = data[utts[i]].label;
  }
  return nn::Tensor<float>::from_values({n, 1, d, t_max}, std::move(values));
}

template <typename TIdx>
void fisher_yates(std::vector<TIdx>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.below(i)]);
}

struct DevEval {
  double eer = 0.0;
  double acc = 0.0;
};

// Inference-mode dev pass: segment-averaged log-probabilities per utterance,
// EER on the bonafide log-probability, accuracy on the argmax.
DevEval evaluate_dev(Model<float>& model, const std::vector<TrainUtt>& dev,
                     const LabelSpace& space, const TrainConfig& cfg) {
  const std::size_t k = space.size();
  std::vector<std::vector<double>> logprob_sums(dev.size(), std::vector<double>(k, 0.0));
  std::vector<std::size_t> seg_counts(dev.size(), 0);

  auto accumulate = [&](const nn::Tensor<float>& logits, const std::vector<std::size_t>& utts) {
    for (std::size_t i = 0; i < utts.size(); ++i) {
      const float* row = logits.data() + i * k;
      double m = row[0];
      for (std::size_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
      double z = 0.0;
      for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - m);
      const double logz = m + std::log(z);
      for (std::size_t j = 0; j < k; ++j)
        logprob_sums[utts[i]][j] += static_cast<double>(row[j]) - logz;
      ++seg_counts[utts[i]];
    }
  };

  if (model.config().whole_utterance()) {
    std::vector<std::size_t> order(dev.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dev[a].feat.rows < dev[b].feat.rows;
    });
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      const std::vector<std::size_t> utts(order.begin() + lo, order.begin() + hi);
      std::vector<std::size_t> valid, labels;
      nn::Tensor<float> x = batch_from_whole(dev, utts, &valid, &labels);
      accumulate(model.forward_whole(x, valid, /*training=*/false), utts);
    }
  } else {
    const std::size_t m = cfg.segmenter.frames_per_segment;
    const std::vector<SegRef> pool = build_segment_pool(dev, cfg.segmenter);
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t lo = 0; lo < pool.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(pool.size(), lo + cfg.batch_size);
      std::vector<std::size_t> labels;
      nn::Tensor<float> x = batch_from_segments(dev, pool, idx, lo, hi, m, &labels);
      std::vector<std::size_t> utts;
      for (std::size_t i = lo; i < hi; ++i) utts.push_back(pool[i].utt);
      accumulate(model.forward_fixed(x, /*training=*/false), utts);
    }
  }

  std::vector<double> bona, spoof;
  std::size_t correct = 0;
  for (std::size_t u = 0; u < dev.size(); ++u) {
    check(seg_counts[u] > 0, "dev utterance scored no segments");
    const std::vector<double>& sums = logprob_sums[u];
    const double score = sums[space.bonafide_index] / static_cast<double>(seg_counts[u]);
    (dev[u].bonafide ? bona : spoof).push_back(score);
    const std::size_t pred =
        static_cast<std::size_t>(std::max_element(sums.begin(), sums.end()) - sums.begin());
    if (pred == dev[u].label) ++correct;
  }
  DevEval out;
  out.eer = eer(bona, spoof).eer;
  out.acc = static_cast<double>(correct) / static_cast<double>(dev.size());
  return out;
}

}  // namespace

TrainResult train(Model<float>& model, const std::vector<TrainUtt>& train_data,
                  const std::vector<TrainUtt>& dev_data, const LabelSpace& space,
                  const TrainConfig& cfg) {
  check(!train_data.empty() && !dev_data.empty(), "train: data must be nonempty");
  check(cfg.epochs >= 1 && cfg.batch_size >= 1, "train: bad epochs/batch_size");
  check(model.config().n_classes == space.size(), "train: model has ",
        model.config().n_classes, " classes but the label space has ", space.size());
  for (const TrainUtt& u : train_data)
    check(u.label < space.size(), "train: label out of range for ", u.utt_id);

  Rng rng(cfg.seed);
  nn::AdamState<float> adam;
  adam.init(model.parameters());
  std::size_t global_step = 0;
  double last_lr = 0.0;

  const bool whole = model.config().whole_utterance();
  std::vector<SegRef> pool;
  std::vector<std::size_t> order;  // segment indices or batch indices
  std::vector<std::vector<std::size_t>> whole_batches;
  if (whole) {
    std::vector<std::size_t> by_len(train_data.size());
    std::iota(by_len.begin(), by_len.end(), 0);
    std::stable_sort(by_len.begin(), by_len.end(), [&](std::size_t a, std::size_t b) {
      return train_data[a].feat.rows < train_data[b].feat.rows;
    });
    for (std::size_t lo = 0; lo < by_len.size(); lo += cfg.batch_size)
      whole_batches.emplace_back(
          by_len.begin() + lo,
          by_len.begin() + std::min(by_len.size(), lo + cfg.batch_size));
    order.resize(whole_batches.size());
  } else {
    pool = build_segment_pool(train_data, cfg.segmenter);
    order.resize(pool.size());
  }
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best_metric = 0.0;
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    fisher_yates(order, rng);
    double loss_sum = 0.0;
    std::size_t sample_count = 0;

    auto step = [&](const nn::Tensor<float>& logits, const std::vector<std::size_t>& labels) {
      nn::Tensor<float> loss = nn::cross_entropy(logits, labels);
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value))
        fail("training diverged: non-finite loss at epoch ", epoch, " step ",
             global_step + 1, " (loss=", loss_value, ")");
      model.zero_grad();
      nn::backward(loss);
      ++global_step;
      last_lr = nn::noam_lr(global_step, cfg.optimizer);
      nn::adam_step(model.parameters(), adam, cfg.optimizer, last_lr);
      loss_sum += loss_value * static_cast<double>(labels.size());
      sample_count += labels.size();
    };

    if (whole) {
      for (const std::size_t bi : order) {
        std::vector<std::size_t> valid, labels;
        nn::Tensor<float> x = batch_from_whole(train_data, whole_batches[bi], &valid, &labels);
        step(model.forward_whole(x, valid, /*training=*/true), labels);
      }
    } else {
      const std::size_t m = cfg.segmenter.frames_per_segment;
      for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
        const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
        std::vector<std::size_t> labels;
        nn::Tensor<float> x = batch_from_segments(train_data, pool, order, lo, hi, m, &labels);
        step(model.forward_fixed(x, /*training=*/true), labels);
      }
    }

    const DevEval dev = evaluate_dev(model, dev_data, space, cfg);
    EpochReport report;
    report.epoch = epoch;
    report.train_loss = loss_sum / static_cast<double>(sample_count);
    report.dev_eer = dev.eer;
    report.dev_acc = dev.acc;
    report.lr = last_lr;
    result.reports.push_back(report);

    const double metric = cfg.selection == Selection::dev_eer ? dev.eer : dev.acc;
    const bool better = best_epoch == 0 ||
                        (cfg.selection == Selection::dev_eer ? metric < best_metric
                                                             : metric > best_metric);
    if (better) {
      best_metric = metric;
      best_epoch = epoch;
      CheckpointMeta meta;
      meta.epoch = epoch;
      meta.selection = cfg.selection == Selection::dev_eer ? "dev_eer" : "dev_acc";
      meta.selection_value = metric;
      result.best = snapshot_model(model, meta);
    }
  }
  result.reports[best_epoch - 1].selected = true;
  return result;
}

std::string format_epoch_report(const EpochReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "epoch=%zu loss=%.6f dev_eer=%.6f dev_acc=%.6f lr=%.8f selected=%d",
                r.epoch, r.train_loss, r.dev_eer, r.dev_acc, r.lr, r.selected ? 1 : 0);
  return buf;
}

void write_epoch_log(const std::string& path, const std::vector<EpochReport>& reports) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "cannot open for writing: ", path);
  for (const EpochReport& r : reports) f << format_epoch_report(r) << '\n';
  check(f.good(), "write failed: ", path);
}

}  // namespace assertkit
