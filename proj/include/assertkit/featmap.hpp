// include/assertkit/featmap.hpp

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

#ifndef ASSERTKIT_FEATMAP_HPP_
#define ASSERTKIT_FEATMAP_HPP_

#include <string>
#include <vector>

#include "assertkit/dsp_frontend.hpp"

namespace assertkit {

struct SegmenterConfig {
  std::size_t frames_per_segment = 400;  // M
  std::size_t overlap = 200;             // L, 0 or 200 in practice
};

struct SegmentSet {
  std::string utt_id;
  std::size_t frames = 0;  // M
  std::size_t dim = 0;     // D
  std::vector<std::vector<float>> segments;  // each M*D row-major
};

// Unified feature map: the utterance is tiled cyclically to E = ceil(T/M)*M
// frames (frame j of the extension = frame j mod T of the original), then cut
// into M-frame segments starting at 0, M-L, 2(M-L), ... while offset+M <= E.
// Segment count = (E-M)/(M-L) + 1.  Requires M > 0, 0 <= L < M, and (M-L)
// dividing M.
SegmentSet unify_and_segment(const FeatureMatrix& feat, const SegmenterConfig& cfg);

struct PaddedBatch {
  std::vector<float> data;  // B x t_max x dim, row-major
  std::size_t batch = 0;
  std::size_t t_max = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> valid_len;  // original frame counts per utterance
};

// Zero-pads a batch of variable-length features to the longest one; rows past
// valid_len[i] are exactly zero.  All inputs must share dim and kind.
PaddedBatch pad_batch(const std::vector<const FeatureMatrix*>& feats);
PaddedBatch pad_batch(const std::vector<FeatureMatrix>& feats);

}  // namespace assertkit

#endif  // ASSERTKIT_FEATMAP_HPP_
