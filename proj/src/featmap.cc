// src/featmap.cc

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

#include "assertkit/featmap.hpp"

#include <algorithm>
#include <cstring>

#include "assertkit/common.hpp"

namespace assertkit {

SegmentSet unify_and_segment(const FeatureMatrix& feat, const SegmenterConfig& cfg) {
  const std::size_t m = cfg.frames_per_segment;
  const std::size_t l = cfg.overlap;
  check(m > 0, "segmenter: M must be positive");
  check(l < m, "segmenter: need 0 <= L < M");
  check(m % (m - l) == 0, "segmenter: (M - L) must divide M");
  const std::size_t t = feat.rows;
  const std::size_t d = feat.cols;
  check(t >= 1, "segmenter: empty feature matrix");

  const std::size_t extended = (t + m - 1) / m * m;  // ceil(T/M)*M
  const std::size_t step = m - l;
  const std::size_t n_segments = (extended - m) / step + 1;

  SegmentSet out;
  out.frames = m;
  out.dim = d;
  out.segments.resize(n_segments);
  for (std::size_t s = 0; s < n_segments; ++s) {
    std::vector<float>& seg = out.segments[s];
    seg.resize(m * d);
    const std::size_t off = s * step;
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t src = (off + r) % t;  // cyclic tiling
      std::memcpy(seg.data() + r * d, feat.data.data() + src * d, d * sizeof(float));
    }
  }
  return out;
}

PaddedBatch pad_batch(const std::vector<const FeatureMatrix*>& feats) {
  check(!feats.empty(), "pad_batch: empty batch");
  const std::size_t d = feats[0]->cols;
  const FeatureKind kind = feats[0]->kind;
  std::size_t t_max = 0;
  for (const FeatureMatrix* f : feats) {
    check(f->cols == d, "pad_batch: mixed feature dimensions (", f->cols, " vs ", d, ")");
    check(f->kind == kind, "pad_batch: mixed feature kinds");
    check(f->rows >= 1, "pad_batch: empty feature matrix");
    t_max = std::max(t_max, f->rows);
  }
  PaddedBatch b;
  b.batch = feats.size();
  b.t_max = t_max;
  b.dim = d;
  b.data.assign(b.batch * t_max * d, 0.0f);
  b.valid_len.resize(b.batch);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    b.valid_len[i] = feats[i]->rows;
    std::memcpy(b.data.data() + i * t_max * d, feats[i]->data.data(),
                feats[i]->rows * d * sizeof(float));
  }
  return b;
}

PaddedBatch pad_batch(const std::vector<FeatureMatrix>& feats) {
  std::vector<const FeatureMatrix*> ptrs;
  ptrs.reserve(feats.size());
  for (const FeatureMatrix& f : feats) ptrs.push_back(&f);
  return pad_batch(ptrs);
}

}  // namespace assertkit
