// src/fusion.cc

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

#include "assertkit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace assertkit {

namespace {

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Cholesky solve of (A + damp*I) x = rhs for a small SPD matrix; returns
// false if the factorization breaks down.
bool solve_spd(std::vector<double> a, std::vector<double> rhs, std::size_t n, double damp,
               std::vector<double>* x) {
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += damp;
  // in-place Cholesky, lower triangle
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (s <= 0.0) return false;
        a[i * n + i] = std::sqrt(s);
      } else {
        a[i * n + j] = s / a[j * n + j];
      }
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * rhs[k];
    rhs[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * rhs[k];
    rhs[i] = s / a[i * n + i];
  }
  *x = std::move(rhs);
  return true;
}

}  // namespace

CalibrationFit fit_calibration(const std::vector<std::vector<double>>& scores,
                               const std::vector<bool>& bonafide,
                               const CalibrationConfig& cfg) {
  check(!scores.empty(), "calibration: no trials");
  check(scores.size() == bonafide.size(), "calibration: scores/keys size mismatch");
  check(cfg.effective_prior > 0.0 && cfg.effective_prior < 1.0,
        "calibration: effective prior must lie in (0, 1)");
  const std::size_t n_sys = scores[0].size();
  check(n_sys >= 1, "calibration: no systems");
  std::size_t n_bona = 0, n_spoof = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    check(scores[i].size() == n_sys, "calibration: ragged score matrix");
    for (const double s : scores[i])
      check(std::isfinite(s), "calibration: non-finite score in trial ", i);
    (bonafide[i] ? n_bona : n_spoof)++;
  }
  check(n_bona > 0 && n_spoof > 0, "calibration: both classes must be present");

  const double prior = cfg.effective_prior;
  const double offset = std::log(prior / (1.0 - prior));
  const double w_bona = prior / static_cast<double>(n_bona);
  const double w_spoof = (1.0 - prior) / static_cast<double>(n_spoof);
  const std::size_t dim = n_sys + 1;  // weights then bias

  std::vector<double> theta(dim, 0.0);
  auto objective = [&](const std::vector<double>& th) {
    double obj = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      double f = th[n_sys] + offset;
      for (std::size_t j = 0; j < n_sys; ++j) f += th[j] * scores[i][j];
      obj += bonafide[i] ? w_bona * softplus(-f) : w_spoof * softplus(f);
    }
    return obj;
  };

  CalibrationFit fit;
  double obj = objective(theta);
  fit.objective.push_back(obj);

  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    // gradient and Hessian in (w, b)
    std::vector<double> grad(dim, 0.0), hess(dim * dim, 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      double f = theta[n_sys] + offset;
      for (std::size_t j = 0; j < n_sys; ++j) f += theta[j] * scores[i][j];
      const double y = bonafide[i] ? 1.0 : -1.0;
      const double wt = bonafide[i] ? w_bona : w_spoof;
      const double dldf = -wt * y * sigmoid(-y * f);
      const double h = wt * sigmoid(f) * sigmoid(-f);
      for (std::size_t j = 0; j < dim; ++j) {
        const double xj = j < n_sys ? scores[i][j] : 1.0;
        grad[j] += dldf * xj;
        for (std::size_t k = 0; k <= j; ++k) {
          const double xk = k < n_sys ? scores[i][k] : 1.0;
          hess[j * dim + k] += h * xj * xk;
        }
      }
    }
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = j + 1; k < dim; ++k) hess[j * dim + k] = hess[k * dim + j];

    std::vector<double> delta;
    double damp = 1e-12;
    std::vector<double> neg_grad(dim);
    for (std::size_t j = 0; j < dim; ++j) neg_grad[j] = -grad[j];
    while (!solve_spd(hess, neg_grad, dim, damp, &delta)) {
      damp *= 100.0;
      check(damp < 1e6, "calibration: Hessian factorization failed");
    }

    // backtracking keeps the objective non-increasing
    double step = 1.0;
    std::vector<double> trial(dim);
    double new_obj = obj;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < dim; ++j) trial[j] = theta[j] + step * delta[j];
      new_obj = objective(trial);
      if (new_obj <= obj) break;
      step *= 0.5;
    }
    if (new_obj > obj) {
      fit.objective.push_back(obj);  // no progress possible; treat as converged
      break;
    }
    theta = trial;
    const double decrease = obj - new_obj;
    obj = new_obj;
    fit.objective.push_back(obj);
    if (decrease < cfg.convergence_tol) {
      fit.model.weights.assign(theta.begin(), theta.begin() + n_sys);
      fit.model.bias = theta[n_sys];
      return fit;
    }
  }
  if (fit.objective.size() >= 2 &&
      fit.objective[fit.objective.size() - 2] - fit.objective.back() < cfg.convergence_tol) {
    fit.model.weights.assign(theta.begin(), theta.begin() + n_sys);
    fit.model.bias = theta[n_sys];
    return fit;
  }
  fail("calibration did not converge within ", cfg.max_iterations,
       " iterations (final objective ", obj, ")");
}

std::vector<double> apply_calibration(const CalibrationModel& model,
                                      const std::vector<std::vector<double>>& scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    check(scores[i].size() == model.weights.size(),
          "apply_calibration: dimension mismatch (", scores[i].size(), " vs ",
          model.weights.size(), ")");
    double f = model.bias;
    for (std::size_t j = 0; j < model.weights.size(); ++j)
      f += model.weights[j] * scores[i][j];
    out[i] = f;
  }
  return out;
}

namespace {

struct DevData {
  std::vector<std::vector<double>> columns;  // per system, protocol order
  std::vector<bool> bonafide;
};

DevData align_systems(const std::vector<std::pair<std::string, ScoreSet>>& systems,
                      const Protocol& protocol) {
  check(!systems.empty(), "fusion: no systems");
  check(!protocol.empty(), "fusion: empty protocol");
  DevData data;
  data.columns.resize(systems.size());
  for (std::size_t s = 0; s < systems.size(); ++s) {
    std::unordered_map<std::string, double> index;
    for (const auto& [id, v] : systems[s].second.entries) index.emplace(id, v);
    data.columns[s].reserve(protocol.size());
    for (const TrialEntry& e : protocol) {
      const auto it = index.find(e.utt_id);
      check(it != index.end(), "system '", systems[s].first, "' has no score for '",
            e.utt_id, "'");
      data.columns[s].push_back(it->second);
    }
  }
  data.bonafide.reserve(protocol.size());
  for (const TrialEntry& e : protocol)
    data.bonafide.push_back(e.key == TrialKey::bonafide);
  return data;
}

std::vector<std::vector<double>> gather(const DevData& data,
                                        const std::vector<std::size_t>& subset) {
  std::vector<std::vector<double>> rows(data.bonafide.size(),
                                        std::vector<double>(subset.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < subset.size(); ++j)
      rows[i][j] = data.columns[subset[j]][i];
  return rows;
}

struct SubsetEval {
  double metric = 0.0;
  double dev_eer = 0.0;
  double dev_min_tdcf = 0.0;
  CalibrationModel model;
};

SubsetEval evaluate_subset(const DevData& data, const std::vector<std::size_t>& subset,
                           const CalibrationConfig& cfg, const TdcfParams& tdcf,
                           FusionMetric metric) {
  const auto rows = gather(data, subset);
  const CalibrationFit fit = fit_calibration(rows, data.bonafide, cfg);
  const std::vector<double> fused = apply_calibration(fit.model, rows);
  std::vector<double> bona, spoof;
  for (std::size_t i = 0; i < fused.size(); ++i)
    (data.bonafide[i] ? bona : spoof).push_back(fused[i]);
  SubsetEval eval;
  eval.dev_eer = eer(bona, spoof).eer;
  eval.dev_min_tdcf = min_tdcf(bona, spoof, tdcf).min_tdcf_norm;
  eval.metric = metric == FusionMetric::min_tdcf ? eval.dev_min_tdcf : eval.dev_eer;
  eval.model = fit.model;
  return eval;
}

}  // namespace

FusionPlan greedy_select(const std::vector<std::pair<std::string, ScoreSet>>& systems,
                         const Protocol& protocol, const CalibrationConfig& cfg,
                         const TdcfParams& tdcf, FusionMetric metric) {
  const DevData data = align_systems(systems, protocol);

  std::vector<std::size_t> selected;
  std::vector<bool> used(systems.size(), false);
  FusionPlan plan;
  SubsetEval current;

  // best single system seeds the plan
  bool have_first = false;
  std::size_t first = 0;
  SubsetEval first_eval;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    const SubsetEval eval = evaluate_subset(data, {s}, cfg, tdcf, metric);
    if (!have_first || eval.metric < first_eval.metric) {
      have_first = true;
      first = s;
      first_eval = eval;
    }
  }
  selected.push_back(first);
  used[first] = true;
  current = first_eval;
  plan.steps.push_back({systems[first].first, current.metric, current.dev_eer,
                        current.dev_min_tdcf});

  while (true) {
    bool have_best = false;
    std::size_t best = 0;
    SubsetEval best_eval;
    for (std::size_t s = 0; s < systems.size(); ++s) {
      if (used[s]) continue;
      std::vector<std::size_t> subset = selected;
      subset.push_back(s);
      const SubsetEval eval = evaluate_subset(data, subset, cfg, tdcf, metric);
      if (!have_best || eval.metric < best_eval.metric) {
        have_best = true;
        best = s;
        best_eval = eval;
      }
    }
    if (!have_best || current.metric - best_eval.metric <= cfg.greedy_tol) break;
    selected.push_back(best);
    used[best] = true;
    current = best_eval;
    plan.steps.push_back({systems[best].first, current.metric, current.dev_eer,
                          current.dev_min_tdcf});
  }
  plan.model = current.model;
  return plan;
}

ScoreSet apply_fusion(const FusionPlan& plan,
                      const std::vector<std::pair<std::string, ScoreSet>>& systems,
                      const Protocol& protocol) {
  std::vector<std::size_t> subset;
  for (const FusionStep& step : plan.steps) {
    bool found = false;
    for (std::size_t s = 0; s < systems.size(); ++s) {
      if (systems[s].first == step.system) {
        subset.push_back(s);
        found = true;
        break;
      }
    }
    check(found, "apply_fusion: plan system '", step.system, "' not provided");
  }
  const DevData data = align_systems(systems, protocol);
  const std::vector<double> fused = apply_calibration(plan.model, gather(data, subset));
  ScoreSet out;
  for (std::size_t i = 0; i < protocol.size(); ++i) out.add(protocol[i].utt_id, fused[i]);
  return out;
}

void write_fusion_report(const std::string& path, const FusionPlan& plan) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "cannot open for writing: ", path);
  f << "# greedy fusion plan\n";
  char buf[256];
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const FusionStep& s = plan.steps[i];
    std::snprintf(buf, sizeof(buf), "step=%zu system=%s dev_eer=%.6f dev_min_tdcf=%.6f",
                  i + 1, s.system.c_str(), s.dev_eer, s.dev_min_tdcf);
    f << buf << '\n';
  }
  f << "bias = ";
  std::snprintf(buf, sizeof(buf), "%.10f", plan.model.bias);
  f << buf << '\n';
  for (std::size_t j = 0; j < plan.model.weights.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "weight_%zu = %.10f", j, plan.model.weights[j]);
    f << buf << '\n';
  }
  check(f.good(), "write failed: ", path);
}

}  // namespace assertkit
