// tests/test_fusion.cc

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

#include "assertkit/common.hpp"
#include "assertkit/fusion.hpp"

using namespace assertkit;

namespace {

// Protocol with n_bona bonafide followed by n_spoof spoof trials.
Protocol toy_protocol(std::size_t n_bona, std::size_t n_spoof) {
  Protocol p;
  for (std::size_t i = 0; i < n_bona + n_spoof; ++i) {
    TrialEntry e;
    e.speaker_id = "S01";
    e.utt_id = "t" + std::to_string(i);
    e.key = i < n_bona ? TrialKey::bonafide : TrialKey::spoof;
    e.system_id = e.key == TrialKey::bonafide ? "-" : "AA";
    p.push_back(e);
  }
  return p;
}

ScoreSet to_scores(const Protocol& p, const std::vector<double>& v) {
  ScoreSet s;
  for (std::size_t i = 0; i < p.size(); ++i) s.add(p[i].utt_id, v[i]);
  return s;
}

}  // namespace

TEST_CASE("calibration drives a separable system's loss toward zero with w > 0") {
  Rng rng(3);
  const std::size_t n = 100;
  std::vector<std::vector<double>> scores;
  std::vector<bool> bona;
  for (std::size_t i = 0; i < n; ++i) {
    const bool b = i < 30;
    scores.push_back({b ? rng.uniform(1.0, 2.0) : rng.uniform(-2.0, -1.0)});
    bona.push_back(b);
  }
  CalibrationConfig cfg;
  const CalibrationFit fit = fit_calibration(scores, bona, cfg);
  CHECK(fit.model.weights[0] > 0.0);
  CHECK(fit.objective.back() < fit.objective.front());
  CHECK(fit.objective.back() < 0.05);
  for (std::size_t i = 1; i < fit.objective.size(); ++i)
    CHECK(fit.objective[i] <= fit.objective[i - 1]);  // monotone non-increasing
}

TEST_CASE("scores that already are LLRs calibrate to (w, b) ~ (1, 0)") {
  // two unit-variance Gaussians at +-mu: llr(z) = 2*mu*z
  Rng rng(5);
  const double mu = 0.8;
  std::vector<std::vector<double>> scores;
  std::vector<bool> bona;
  for (int i = 0; i < 4000; ++i) {
    const bool b = i % 2 == 0;
    const double z = rng.normal() + (b ? mu : -mu);
    scores.push_back({2.0 * mu * z});
    bona.push_back(b);
  }
  CalibrationConfig cfg;
  cfg.effective_prior = 0.672;
  const CalibrationFit fit = fit_calibration(scores, bona, cfg);
  CHECK(std::abs(fit.model.weights[0] - 1.0) < 0.1);
  CHECK(std::abs(fit.model.bias) < 0.1);
}

TEST_CASE("a key-independent system gets weight ~ 0 next to an informative one") {
  // overlapping classes keep the optimum finite and well-conditioned, so the
  // noise feature's population-optimal weight is exactly zero
  Rng rng(7);
  std::vector<std::vector<double>> scores;
  std::vector<bool> bona;
  for (int i = 0; i < 6000; ++i) {
    const bool b = i % 4 == 0;
    const double informative = (b ? 1.0 : -1.0) + rng.normal();
    const double noise = rng.normal();
    scores.push_back({informative, noise});
    bona.push_back(b);
  }
  const CalibrationFit fit = fit_calibration(scores, bona, CalibrationConfig{});
  CHECK(std::abs(fit.model.weights[1]) < 0.05);
  CHECK(fit.model.weights[0] > 0.0);
}

TEST_CASE("apply_calibration") {
  CalibrationModel identity;
  identity.weights = {1.0};
  identity.bias = 0.0;
  CHECK(apply_calibration(identity, {{2.5}, {-1.0}}) == std::vector<double>{2.5, -1.0});

  CalibrationModel mix;
  mix.weights = {0.5, 0.5};
  mix.bias = 1.0;
  CHECK(apply_calibration(mix, {{2.0, 4.0}})[0] == doctest::Approx(4.0));

  CHECK_THROWS_WITH_AS(apply_calibration(mix, {{1.0}}), doctest::Contains("dimension"),
                       Error);
}

TEST_CASE("calibration with positive weight preserves the EER") {
  Rng rng(9);
  const Protocol p = toy_protocol(30, 90);
  std::vector<double> raw;
  std::vector<std::vector<double>> rows;
  std::vector<bool> bona;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool b = p[i].key == TrialKey::bonafide;
    const double v = (b ? 0.8 : -0.8) + rng.normal();
    raw.push_back(v);
    rows.push_back({v});
    bona.push_back(b);
  }
  const CalibrationFit fit = fit_calibration(rows, bona, CalibrationConfig{});
  REQUIRE(fit.model.weights[0] > 0.0);
  const std::vector<double> calibrated = apply_calibration(fit.model, rows);
  std::vector<double> rb, rs, cb, cs;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    (bona[i] ? rb : rs).push_back(raw[i]);
    (bona[i] ? cb : cs).push_back(calibrated[i]);
  }
  CHECK(eer(cb, cs).eer == doctest::Approx(eer(rb, rs).eer).epsilon(1e-12));
}

TEST_CASE("greedy fusion") {
  const TdcfParams tdcf;
  CalibrationConfig cfg;

  SUBCASE("a single system is the whole plan") {
    Rng rng(11);
    const Protocol p = toy_protocol(20, 60);
    std::vector<double> v;
    for (std::size_t i = 0; i < p.size(); ++i)
      v.push_back((p[i].key == TrialKey::bonafide ? 1.0 : -1.0) + 0.5 * rng.normal());
    const FusionPlan plan = greedy_select({{"only", to_scores(p, v)}}, p, cfg, tdcf,
                                          FusionMetric::min_tdcf);
    REQUIRE(plan.steps.size() == 1);
    CHECK(plan.steps[0].system == "only");
  }

  SUBCASE("a duplicate candidate is not added") {
    Rng rng(12);
    const Protocol p = toy_protocol(20, 60);
    std::vector<double> v;
    for (std::size_t i = 0; i < p.size(); ++i)
      v.push_back((p[i].key == TrialKey::bonafide ? 1.0 : -1.0) + 0.7 * rng.normal());
    const ScoreSet s = to_scores(p, v);
    const FusionPlan plan =
        greedy_select({{"a", s}, {"b", s}}, p, cfg, tdcf, FusionMetric::min_tdcf);
    CHECK(plan.steps.size() == 1);
    CHECK(plan.steps[0].system == "a");  // tie broken by given order
  }

  SUBCASE("complementary systems fuse below both singles") {
    Rng rng(13);
    const Protocol p = toy_protocol(40, 120);
    // system A errs on spoof trials 0..14, system B on spoof trials 15..29
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool bona = p[i].key == TrialKey::bonafide;
      const std::size_t spoof_idx = bona ? 0 : i - 40;
      double a = bona ? 1.0 : -1.0;
      double b = bona ? 1.0 : -1.0;
      if (!bona && spoof_idx < 15) a = 1.2;   // A is fooled
      if (!bona && spoof_idx >= 15 && spoof_idx < 30) b = 1.2;  // B is fooled
      va.push_back(a + 0.1 * rng.normal());
      vb.push_back(b + 0.1 * rng.normal());
    }
    const std::vector<std::pair<std::string, ScoreSet>> systems = {
        {"sysA", to_scores(p, va)}, {"sysB", to_scores(p, vb)}};
    const FusionPlan plan = greedy_select(systems, p, cfg, tdcf, FusionMetric::min_tdcf);
    REQUIRE(plan.steps.size() == 2);

    // fused dev metric is at least as good as each single
    std::vector<double> onlyA_b, onlyA_s, onlyB_b, onlyB_s;
    for (std::size_t i = 0; i < p.size(); ++i) {
      (p[i].key == TrialKey::bonafide ? onlyA_b : onlyA_s).push_back(va[i]);
      (p[i].key == TrialKey::bonafide ? onlyB_b : onlyB_s).push_back(vb[i]);
    }
    const double singleA = min_tdcf(onlyA_b, onlyA_s, tdcf).min_tdcf_norm;
    const double singleB = min_tdcf(onlyB_b, onlyB_s, tdcf).min_tdcf_norm;
    const double fused = plan.steps.back().dev_min_tdcf;
    CHECK(fused <= singleA);
    CHECK(fused <= singleB);
    // accepted step metrics are non-increasing
    for (std::size_t i = 1; i < plan.steps.size(); ++i)
      CHECK(plan.steps[i].metric <= plan.steps[i - 1].metric);

    // apply_fusion reproduces the plan's final model output
    const ScoreSet fused_scores = apply_fusion(plan, systems, p);
    CHECK(fused_scores.entries.size() == p.size());
  }
}

TEST_CASE("changing the prior changes only the calibration map") {
  Rng rng(15);
  std::vector<std::vector<double>> rows;
  std::vector<bool> bona;
  for (int i = 0; i < 300; ++i) {
    const bool b = i % 3 == 0;
    rows.push_back({(b ? 1.0 : -1.0) + 0.6 * rng.normal()});
    bona.push_back(b);
  }
  CalibrationConfig lo, hi;
  lo.effective_prior = 0.3;
  hi.effective_prior = 0.707;
  const CalibrationFit fit_lo = fit_calibration(rows, bona, lo);
  const CalibrationFit fit_hi = fit_calibration(rows, bona, hi);
  CHECK(fit_lo.model.bias != fit_hi.model.bias);
  // order preserved whenever w > 0
  REQUIRE(fit_lo.model.weights[0] > 0.0);
  REQUIRE(fit_hi.model.weights[0] > 0.0);
  const auto a = apply_calibration(fit_lo.model, rows);
  const auto b = apply_calibration(fit_hi.model, rows);
  for (std::size_t i = 1; i < a.size(); ++i)
    CHECK(((a[i] > a[0]) == (b[i] > b[0]) ||
           rows[i][0] == rows[0][0]));
}
