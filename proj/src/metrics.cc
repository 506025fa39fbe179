// src/metrics.cc

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

#include "assertkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

namespace assertkit {

void ScoreSet::add(const std::string& utt_id, double score) {
  check(std::isfinite(score), "score for ", utt_id, " is not finite");
  check(find(utt_id) == nullptr, "duplicate score for utt_id '", utt_id, "'");
  entries.emplace_back(utt_id, score);
}

const double* ScoreSet::find(const std::string& utt_id) const {
  for (const auto& [id, s] : entries)
    if (id == utt_id) return &s;
  return nullptr;
}

void write_score_file(const std::string& path, const ScoreSet& scores) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "cannot open for writing: ", path);
  char buf[64];
  for (const auto& [id, s] : scores.entries) {
    std::snprintf(buf, sizeof(buf), "%.6f", s);
    f << id << ' ' << buf << '\n';
  }
  check(f.good(), "write failed: ", path);
}

ScoreSet read_score_file(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open score file: ", path);
  ScoreSet scores;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (strings::trim(line).empty()) continue;
    const std::vector<std::string> fields = strings::split_ws(line);
    check(fields.size() == 2, "score file ", path, " line ", lineno,
          ": expected 'utt_id score'");
    try {
      scores.add(fields[0], std::stod(fields[1]));
    } catch (const std::invalid_argument&) {
      fail("score file ", path, " line ", lineno, ": bad score '", fields[1], "'");
    }
  }
  return scores;
}

void split_by_key(const ScoreSet& scores, const Protocol& protocol,
                  std::vector<double>* bonafide, std::vector<double>* spoof) {
  std::unordered_map<std::string, double> index;
  index.reserve(scores.entries.size());
  for (const auto& [id, s] : scores.entries) index.emplace(id, s);
  bonafide->clear();
  spoof->clear();
  for (const TrialEntry& e : protocol) {
    const auto it = index.find(e.utt_id);
    check(it != index.end(), "no score for protocol utt_id '", e.utt_id, "'");
    (e.key == TrialKey::bonafide ? bonafide : spoof)->push_back(it->second);
  }
}

EerResult eer(const std::vector<double>& bonafide, const std::vector<double>& spoof) {
  check(!bonafide.empty() && !spoof.empty(),
        "eer: need at least one bonafide and one spoof trial");
  std::vector<double> b = bonafide, s = spoof;
  std::sort(b.begin(), b.end());
  std::sort(s.begin(), s.end());

  std::vector<double> thresholds;
  thresholds.reserve(b.size() + s.size());
  std::merge(b.begin(), b.end(), s.begin(), s.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const auto nb = static_cast<long long>(b.size());
  const auto ns = static_cast<long long>(s.size());
  // integer miss/fa counts at a threshold; score >= t accepts as bonafide
  auto miss_count = [&](double t) {
    return static_cast<long long>(std::lower_bound(b.begin(), b.end(), t) - b.begin());
  };
  auto fa_count = [&](double t) {
    return ns - static_cast<long long>(std::lower_bound(s.begin(), s.end(), t) - s.begin());
  };

  long long prev_miss = 0, prev_fa = ns;  // below every score: accept all
  double prev_thr = thresholds.front();
  for (std::size_t i = 0; i <= thresholds.size(); ++i) {
    long long m, fa;
    double thr;
    if (i < thresholds.size()) {
      thr = thresholds[i];
      m = miss_count(thr);
      fa = fa_count(thr);
    } else {  // sentinel above all scores: reject all
      thr = thresholds.back();
      m = nb;
      fa = 0;
    }
    const long long diff = m * ns - fa * nb;  // sign of P_miss - P_fa
    if (diff == 0) {
      EerResult r;
      r.eer = static_cast<double>(m) / static_cast<double>(nb);
      r.threshold = thr;
      return r;
    }
    if (diff > 0) {
      // crossing between the previous point and this one
      const double m1 = static_cast<double>(prev_miss) / static_cast<double>(nb);
      const double f1 = static_cast<double>(prev_fa) / static_cast<double>(ns);
      const double m2 = static_cast<double>(m) / static_cast<double>(nb);
      const double f2 = static_cast<double>(fa) / static_cast<double>(ns);
      const double t = (f1 - m1) / ((m2 - m1) - (f2 - f1));
      EerResult r;
      r.eer = m1 + t * (m2 - m1);
      r.threshold = prev_thr + t * (thr - prev_thr);
      return r;
    }
    prev_miss = m;
    prev_fa = fa;
    prev_thr = thr;
  }
  fail("eer: no crossing found");  // unreachable: the sentinel has diff > 0
}

void TdcfParams::validate() const {
  check(pi_tar >= 0 && pi_non >= 0 && pi_spoof >= 0, "tdcf: priors must be nonnegative");
  check(std::abs(pi_tar + pi_non + pi_spoof - 1.0) < 1e-9, "tdcf: priors must sum to 1");
  for (const double p : {p_miss_asv, p_fa_asv, p_miss_spoof_asv})
    check(p >= 0.0 && p <= 1.0, "tdcf: ASV rates must lie in [0, 1]");
  check(c1() > 0, "tdcf: derived coefficient C1 = ", c1(),
        " must be positive; adjust priors/costs");
  check(c2() > 0, "tdcf: derived coefficient C2 = ", c2(),
        " must be positive; adjust priors/costs");
}

TdcfResult min_tdcf(const std::vector<double>& bonafide, const std::vector<double>& spoof,
                    const TdcfParams& params) {
  params.validate();
  check(!bonafide.empty() && !spoof.empty(),
        "min_tdcf: need at least one bonafide and one spoof trial");
  std::vector<double> b = bonafide, s = spoof;
  std::sort(b.begin(), b.end());
  std::sort(s.begin(), s.end());
  std::vector<double> thresholds;
  std::merge(b.begin(), b.end(), s.begin(), s.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double c_1 = params.c1();
  const double c_2 = params.c2();
  const double norm = std::min(c_1, c_2);
  const double nb = static_cast<double>(b.size());
  const double ns = static_cast<double>(s.size());

  TdcfResult best;
  best.min_tdcf_norm = std::numeric_limits<double>::infinity();
  auto consider = [&](double pmiss, double pfa, double thr) {
    const double cost = (c_1 * pmiss + c_2 * pfa) / norm;
    if (cost < best.min_tdcf_norm) {
      best.min_tdcf_norm = cost;
      best.threshold = thr;
    }
  };
  // threshold below all scores: accept everything
  consider(0.0, 1.0, -std::numeric_limits<double>::infinity());
  for (const double t : thresholds) {
    const double miss = static_cast<double>(std::lower_bound(b.begin(), b.end(), t) - b.begin());
    const double fa = ns - static_cast<double>(std::lower_bound(s.begin(), s.end(), t) - s.begin());
    consider(miss / nb, fa / ns, t);
  }
  // above all scores: reject everything
  consider(1.0, 0.0, std::numeric_limits<double>::infinity());
  return best;
}

MetricReport evaluate_scores(const ScoreSet& scores, const Protocol& protocol,
                             const TdcfParams& params) {
  std::vector<double> bonafide, spoof;
  split_by_key(scores, protocol, &bonafide, &spoof);
  const EerResult e = eer(bonafide, spoof);
  const TdcfResult t = min_tdcf(bonafide, spoof, params);
  MetricReport report;
  report.eer = e.eer;
  report.eer_threshold = e.threshold;
  report.min_tdcf_norm = t.min_tdcf_norm;
  report.threshold_at_min = t.threshold;
  return report;
}

double bonafide_log_prob(const std::vector<float>& logits, std::size_t bonafide_index) {
  check(bonafide_index < logits.size(), "bonafide index out of range");
  double m = logits[0];
  for (const float v : logits) m = std::max(m, static_cast<double>(v));
  double z = 0.0;
  for (const float v : logits) z += std::exp(static_cast<double>(v) - m);
  return static_cast<double>(logits[bonafide_index]) - m - std::log(z);
}

namespace {

// Segments are frame-major (M x D); images are 1 x D x M.
nn::Tensor<float> segments_to_batch(const SegmentSet& segs) {
  const std::size_t n = segs.segments.size();
  const std::size_t d = segs.dim;
  const std::size_t m = segs.frames;
  std::vector<float> values(n * d * m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<float>& seg = segs.segments[i];
    float* img = values.data() + i * d * m;
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t k = 0; k < d; ++k) img[k * m + t] = seg[t * d + k];
  }
  return nn::Tensor<float>::from_values({n, 1, d, m}, std::move(values));
}

nn::Tensor<float> feature_to_whole(const FeatureMatrix& feat) {
  std::vector<float> values(feat.rows * feat.cols);
  for (std::size_t t = 0; t < feat.rows; ++t)
    for (std::size_t k = 0; k < feat.cols; ++k)
      values[k * feat.rows + t] = feat.data[t * feat.cols + k];
  return nn::Tensor<float>::from_values({1, 1, feat.cols, feat.rows}, std::move(values));
}

}  // namespace

double score_utterance(Model<float>& model, const FeatureMatrix& feat,
                       const SegmenterConfig& seg, std::size_t bonafide_index) {
  if (model.config().whole_utterance()) {
    nn::Tensor<float> x = feature_to_whole(feat);
    nn::Tensor<float> logits = model.forward_whole(x, {feat.rows}, /*training=*/false);
    std::vector<float> row(logits.data(), logits.data() + logits.dim(1));
    return bonafide_log_prob(row, bonafide_index);
  }
  const SegmentSet segs = unify_and_segment(feat, seg);
  nn::Tensor<float> x = segments_to_batch(segs);
  nn::Tensor<float> logits = model.forward_fixed(x, /*training=*/false);
  const std::size_t k = logits.dim(1);
  double acc = 0.0;
  for (std::size_t i = 0; i < segs.segments.size(); ++i) {
    std::vector<float> row(logits.data() + i * k, logits.data() + (i + 1) * k);
    acc += bonafide_log_prob(row, bonafide_index);
  }
  return acc / static_cast<double>(segs.segments.size());
}

ScoreSet score_protocol(Model<float>& model, const Protocol& protocol,
                        const std::string& features_dir, const SegmenterConfig& seg,
                        std::size_t bonafide_index) {
  ScoreSet scores;
  for (const TrialEntry& e : protocol) {
    const FeatureMatrix feat = load_feature(features_dir + "/" + e.utt_id + ".feat");
    scores.add(e.utt_id, score_utterance(model, feat, seg, bonafide_index));
  }
  return scores;
}

}  // namespace assertkit
