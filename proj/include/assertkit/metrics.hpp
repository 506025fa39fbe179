// include/assertkit/metrics.hpp

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

#ifndef ASSERTKIT_METRICS_HPP_
#define ASSERTKIT_METRICS_HPP_

#include <map>
#include <string>
#include <vector>

#include "assertkit/audio_io.hpp"
#include "assertkit/checkpoint.hpp"
#include "assertkit/featmap.hpp"
#include "assertkit/models.hpp"

namespace assertkit {

// Per-utterance countermeasure scores; higher means more bonafide.  Scores
// are the bonafide log-probability or a calibrated combination thereof.
struct ScoreSet {
  std::vector<std::pair<std::string, double>> entries;  // order preserved

  void add(const std::string& utt_id, double score);
  const double* find(const std::string& utt_id) const;
};

// Score file: one "utt_id score" line per trial, score printed with 6
// decimal places; the reader accepts any amount of whitespace.
void write_score_file(const std::string& path, const ScoreSet& scores);
ScoreSet read_score_file(const std::string& path);

// Splits scores into bonafide/spoof using the protocol keys.  Every protocol
// entry must have a score.
void split_by_key(const ScoreSet& scores, const Protocol& protocol,
                  std::vector<double>* bonafide, std::vector<double>* spoof);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/*
   eer() sweeps every distinct score as a decision threshold (score >= t is
   accepted as bonafide).  P_miss(t) is the fraction of bonafide trials below
   t and P_fa(t) the fraction of spoof trials at or above t, so as t grows
   P_miss rises from 0 and P_fa falls from 1.  The EER is the value at the
   crossing; when no threshold gives P_miss == P_fa exactly, the two rates
   are interpolated linearly between the adjacent sweep points where the sign
   of (P_miss - P_fa) changes.  A sentinel threshold above all scores
   (reject everything: P_miss 1, P_fa 0) guarantees the crossing exists.
*/
EerResult eer(const std::vector<double>& bonafide, const std::vector<double>& spoof);

// Priors, costs, and the fixed ASV operating point entering the tandem cost.
// Defaults mirror the ASVspoof 2019 evaluation-plan cost model; the ASV error
// rates are configuration (the organizers' ASV is not redistributable).
struct TdcfParams {
  double pi_tar = 0.9405;   // (1 - pi_spoof) * 0.99
  double pi_non = 0.0095;   // (1 - pi_spoof) * 0.01
  double pi_spoof = 0.05;
  double c_miss_asv = 1.0;
  double c_fa_asv = 10.0;
  double c_miss_cm = 1.0;
  double c_fa_cm = 10.0;
  double p_miss_asv = 0.01;
  double p_fa_asv = 0.01;
  double p_miss_spoof_asv = 0.05;

  // t-DCF(t) = c1 * P_miss_cm(t) + c2 * P_fa_cm(t), normalized by min(c1,c2).
  double c1() const {
    return pi_tar * (c_miss_cm - c_miss_asv * p_miss_asv) - pi_non * c_fa_asv * p_fa_asv;
  }
  double c2() const { return c_fa_cm * pi_spoof * (1.0 - p_miss_spoof_asv); }
  void validate() const;
};

struct TdcfResult {
  double min_tdcf_norm = 0.0;
  double threshold = 0.0;
};

// Minimum normalized tandem cost over all thresholds including the trivial
// accept-all / reject-all endpoints (which bound it above by 1).
TdcfResult min_tdcf(const std::vector<double>& bonafide, const std::vector<double>& spoof,
                    const TdcfParams& params);

struct MetricReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double min_tdcf_norm = 0.0;
  double threshold_at_min = 0.0;
};

MetricReport evaluate_scores(const ScoreSet& scores, const Protocol& protocol,
                             const TdcfParams& params);

// log-probability of the bonafide class from raw logits.
double bonafide_log_prob(const std::vector<float>& logits, std::size_t bonafide_index);

// Segment-averaged utterance score: fixed-size models average the bonafide
// log-probability over all unified-map segments; the mean-std model runs one
// whole-utterance forward.  Inference mode (running batchnorm statistics).
double score_utterance(Model<float>& model, const FeatureMatrix& feat,
                       const SegmenterConfig& seg, std::size_t bonafide_index);

// Scores every protocol entry, loading "<features_dir>/<utt_id>.feat".
// Utterances are processed in parallel; output order follows the protocol.
ScoreSet score_protocol(Model<float>& model, const Protocol& protocol,
                        const std::string& features_dir, const SegmenterConfig& seg,
                        std::size_t bonafide_index);

}  // namespace assertkit

#endif  // ASSERTKIT_METRICS_HPP_
