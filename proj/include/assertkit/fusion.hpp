// include/assertkit/fusion.hpp

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

#ifndef ASSERTKIT_FUSION_HPP_
#define ASSERTKIT_FUSION_HPP_

#include <string>
#include <vector>

#include "assertkit/metrics.hpp"

namespace assertkit {

struct CalibrationConfig {
  double effective_prior = 0.672;  // 0.672 PA, 0.707 LA
  std::size_t max_iterations = 100;
  double convergence_tol = 1e-6;   // objective decrease per Newton iteration
  double greedy_tol = 1e-4;        // absolute dev-metric improvement to accept a system
};

// Affine score map to log-likelihood-ratio scale: fused = w . s + b.
struct CalibrationModel {
  std::vector<double> weights;
  double bias = 0.0;
};

struct CalibrationFit {
  CalibrationModel model;
  std::vector<double> objective;  // per-iteration values, non-increasing
};

/*
   Prior-weighted logistic regression: with f = w.s + b + logit(prior), the
   objective is
     (prior/N_bona)    sum_bonafide log(1 + exp(-f))
   + ((1-prior)/N_spoof) sum_spoof  log(1 + exp(+f)),
   minimized by damped Newton with backtracking from w = 0, b = 0 (convex, so
   no seed enters).  Convergence: objective decrease below convergence_tol.
   Errors on non-convergence within max_iterations, reporting the final
   objective.
*/
CalibrationFit fit_calibration(const std::vector<std::vector<double>>& scores,
                               const std::vector<bool>& bonafide,
                               const CalibrationConfig& cfg);

// fused[i] = w . scores[i] + b
std::vector<double> apply_calibration(const CalibrationModel& model,
                                      const std::vector<std::vector<double>>& scores);

enum class FusionMetric { min_tdcf, eer };

struct FusionStep {
  std::string system;
  double metric = 0.0;  // dev metric after this system was added
  double dev_eer = 0.0;
  double dev_min_tdcf = 0.0;
};

struct FusionPlan {
  std::vector<FusionStep> steps;  // selection order
  CalibrationModel model;         // final calibration over the selected systems
};

// Greedy forward selection: start from the single system with the best dev
// metric, then repeatedly add the candidate whose inclusion (with calibration
// refit) most reduces it; stop when no candidate improves by more than
// cfg.greedy_tol.  Ties keep the earliest system in the given order.
FusionPlan greedy_select(const std::vector<std::pair<std::string, ScoreSet>>& systems,
                         const Protocol& protocol, const CalibrationConfig& cfg,
                         const TdcfParams& tdcf, FusionMetric metric);

// Fused scores for the plan's systems, aligned to the protocol order.
ScoreSet apply_fusion(const FusionPlan& plan,
                      const std::vector<std::pair<std::string, ScoreSet>>& systems,
                      const Protocol& protocol);

void write_fusion_report(const std::string& path, const FusionPlan& plan);

}  // namespace assertkit

#endif  // ASSERTKIT_FUSION_HPP_
