// include/assertkit/checkpoint.hpp

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

#ifndef ASSERTKIT_CHECKPOINT_HPP_
#define ASSERTKIT_CHECKPOINT_HPP_

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "assertkit/models.hpp"

namespace assertkit {

struct CheckpointMeta {
  std::size_t epoch = 0;
  std::string selection = "none";  // dev_eer | dev_acc | none
  double selection_value = 0.0;
};

// In-memory copy of a trained model: config, named parameter arrays and
// batchnorm running statistics, plus training metadata.
struct Snapshot {
  ModelConfig config;
  std::vector<std::pair<std::string, std::vector<float>>> params;
  std::vector<std::pair<std::string, std::vector<float>>> buffers;
  std::vector<std::vector<std::size_t>> param_shapes;
  CheckpointMeta meta;
};

Snapshot snapshot_model(Model<float>& model, const CheckpointMeta& meta);
void restore_model(Model<float>& model, const Snapshot& snap);
std::unique_ptr<Model<float>> model_from_snapshot(const Snapshot& snap);

// Checkpoint container: a text header
//   assertkit-checkpoint 1
//   <model config key = value lines>
//   epoch = ... / selection = ... / selection_value = ...
//   [params]  name dim0,dim1,...   (one per line, manifest order)
//   [buffers] name length
//   [data]
// followed by the float32 little-endian arrays in manifest order (params
// first, then buffers).  Loading reproduces forward outputs bit-exactly.
void save_checkpoint(const std::string& path, const Snapshot& snap);
Snapshot load_checkpoint(const std::string& path);

}  // namespace assertkit

#endif  // ASSERTKIT_CHECKPOINT_HPP_
