// include/assertkit/training.hpp

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

#ifndef ASSERTKIT_TRAINING_HPP_
#define ASSERTKIT_TRAINING_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "assertkit/checkpoint.hpp"
#include "assertkit/featmap.hpp"
#include "assertkit/metrics.hpp"
#include "assertkit/nn/optim.hpp"

namespace assertkit {

enum class Objective { binary, multiclass };
enum class Selection { dev_eer, dev_acc };

// Class label layout.  Binary: [spoof, bonafide].  Multi-class: bonafide
// followed by the per-mode attack/system IDs (10 labels for PA, 7 for LA).
struct LabelSpace {
  CorpusMode mode = CorpusMode::PA;
  Objective objective = Objective::binary;
  std::vector<std::string> labels;
  std::size_t bonafide_index = 0;

  static LabelSpace make(CorpusMode mode, Objective objective);
  std::size_t size() const { return labels.size(); }
};

// utt_id -> class index.  Multi-class mode rejects spoof entries whose
// system_id is not in the label list.
std::unordered_map<std::string, std::size_t> make_labels(const Protocol& protocol,
                                                         const LabelSpace& space);

struct TrainConfig {
  Objective objective = Objective::binary;
  Selection selection = Selection::dev_eer;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;  // unified maps; 32 suggested for whole-utterance logspec
  nn::OptimizerConfig optimizer;
  SegmenterConfig segmenter;
  std::uint64_t seed = 1;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_eer = 0.0;
  double dev_acc = 0.0;
  double lr = 0.0;  // learning rate at the last step of the epoch
  bool selected = false;
};

struct TrainUtt {
  std::string utt_id;
  FeatureMatrix feat;
  std::size_t label = 0;
  bool bonafide = false;
};

// Loads "<features_dir>/<utt_id>.feat" for every protocol entry and attaches
// the class index from the label space.
std::vector<TrainUtt> assemble_data(const Protocol& protocol, const std::string& features_dir,
                                    const LabelSpace& space);

struct TrainResult {
  Snapshot best;  // checkpoint of the selected epoch
  std::vector<EpochReport> reports;
};

// One epoch = one pass over all training segments (unified maps) or all
// utterances (whole-utterance models).  Each step: forward, cross-entropy,
// backward, Adam with the warm-up/inverse-sqrt schedule.  After every epoch
// the dev EER (segment-averaged bonafide log-probability scores) and dev
// accuracy are computed in inference mode; the best epoch under
// cfg.selection (ties to the earliest) is returned as a checkpoint.
// Non-finite loss aborts with a diagnostic.
TrainResult train(Model<float>& model, const std::vector<TrainUtt>& train_data,
                  const std::vector<TrainUtt>& dev_data, const LabelSpace& space,
                  const TrainConfig& cfg);

// One line per epoch: "epoch=.. loss=.. dev_eer=.. dev_acc=.. lr=.. selected=.."
std::string format_epoch_report(const EpochReport& r);
void write_epoch_log(const std::string& path, const std::vector<EpochReport>& reports);

}  // namespace assertkit

#endif  // ASSERTKIT_TRAINING_HPP_
