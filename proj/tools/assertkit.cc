// tools/assertkit.cc

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

// Command-line front end for the anti-spoofing pipeline:
//   synth -> extract -> train -> score -> eval / fuse
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "assertkit/audio_io.hpp"
#include "assertkit/checkpoint.hpp"
#include "assertkit/dsp_frontend.hpp"
#include "assertkit/fusion.hpp"
#include "assertkit/metrics.hpp"
#include "assertkit/training.hpp"

using namespace assertkit;
namespace fs = std::filesystem;

namespace {

CorpusMode parse_mode(const std::string& s) {
  const std::string m = strings::lower(s);
  if (m == "pa") return CorpusMode::PA;
  if (m == "la") return CorpusMode::LA;
  fail("unknown mode '", s, "' (expected PA or LA)");
}

struct SynthArgs {
  std::string mode = "PA";
  std::string out;
  SynthConfig cfg;
  double dur_min = 1.0, dur_max = 4.0;
};

struct ExtractArgs {
  std::string feature = "logspec";
  std::string protocol;
  std::string wav_dir;
  std::string out;
  StftConfig stft;
  CqccConfig cqcc_cfg;
  std::string window = "hamming";
};

struct TrainArgs {
  std::string model = "senet34";
  std::string mode = "PA";
  std::string objective = "binary";
  std::string select = "eer";
  std::string features;
  std::string train_protocol;
  std::string dev_protocol;
  std::string ckpt;
  std::string epoch_log;
  std::size_t epochs = 30;
  std::size_t batch = 0;  // 0 -> model-dependent default
  std::uint64_t seed = 1;
  std::uint64_t init_seed = 1;
  double peak_lr = 1e-3;
  std::size_t warmup = 1000;
  double weight_decay = 1e-9;
  std::size_t seg_m = 400;
  std::size_t seg_l = 200;
  std::vector<std::size_t> units;
  std::vector<std::size_t> channels;
  std::vector<std::size_t> dilations;
};

struct ScoreArgs {
  std::string ckpt;
  std::string features;
  std::string protocol;
  std::string out;
  std::size_t seg_m = 400;
  std::size_t seg_l = 200;
};

struct EvalArgs {
  std::string scores;
  std::string protocol;
  TdcfParams tdcf;
};

struct FuseArgs {
  std::vector<std::string> scores;
  std::string protocol;
  std::string out;
  std::string report;
  std::string metric = "tdcf";
  CalibrationConfig cal;
  TdcfParams tdcf;
};

void add_tdcf_options(CLI::App* app, TdcfParams& t) {
  app->add_option("--pi-tar", t.pi_tar, "Target prior");
  app->add_option("--pi-non", t.pi_non, "Non-target prior");
  app->add_option("--pi-spoof", t.pi_spoof, "Spoof prior");
  app->add_option("--c-miss-asv", t.c_miss_asv, "ASV miss cost");
  app->add_option("--c-fa-asv", t.c_fa_asv, "ASV false-acceptance cost");
  app->add_option("--c-miss-cm", t.c_miss_cm, "CM miss cost");
  app->add_option("--c-fa-cm", t.c_fa_cm, "CM false-acceptance cost");
  app->add_option("--p-miss-asv", t.p_miss_asv, "Fixed ASV miss rate");
  app->add_option("--p-fa-asv", t.p_fa_asv, "Fixed ASV false-acceptance rate");
  app->add_option("--p-miss-spoof-asv", t.p_miss_spoof_asv,
                  "Fixed ASV miss rate on spoof trials");
}

int run_synth(const SynthArgs& args) {
  SynthConfig cfg = args.cfg;
  cfg.mode = parse_mode(args.mode);
  cfg.duration_range = {args.dur_min, args.dur_max};
  const Protocol p = synth_corpus(cfg, args.out);
  std::cout << "wrote " << p.size() << " utterances under " << args.out << "\n";
  return 0;
}

int run_extract(const ExtractArgs& args) {
  const Protocol protocol = read_protocol_file(args.protocol);
  check(args.feature == "logspec" || args.feature == "cqcc",
        "unknown feature kind '", args.feature, "'");
  std::error_code ec;
  fs::create_directories(args.out, ec);
  check(!ec, "cannot create output directory: ", args.out);

  StftConfig stft = args.stft;
  stft.window = args.window == "hann" ? WindowKind::hann : WindowKind::hamming;

  parallel_for(protocol.size(), [&](std::size_t i) {
    const std::string& utt = protocol[i].utt_id;
    const AudioClip clip = read_wav(args.wav_dir + "/" + utt + ".wav");
    const FeatureMatrix fm =
        args.feature == "logspec" ? logspec(clip, stft) : cqcc(clip, args.cqcc_cfg);
    save_feature(args.out + "/" + utt + ".feat", fm);
  });
  std::cout << "extracted " << args.feature << " for " << protocol.size()
            << " utterances into " << args.out << "\n";
  return 0;
}

int run_train(const TrainArgs& args) {
  const CorpusMode mode = parse_mode(args.mode);
  check(args.objective == "binary" || args.objective == "multiclass",
        "unknown objective '", args.objective, "'");
  check(args.select == "eer" || args.select == "acc", "unknown selection '", args.select,
        "' (expected eer or acc)");
  const Objective objective =
      args.objective == "binary" ? Objective::binary : Objective::multiclass;
  const LabelSpace space = LabelSpace::make(mode, objective);

  const Protocol train_protocol = read_protocol_file(args.train_protocol);
  const Protocol dev_protocol = read_protocol_file(args.dev_protocol);
  const std::vector<TrainUtt> train_data = assemble_data(train_protocol, args.features, space);
  const std::vector<TrainUtt> dev_data = assemble_data(dev_protocol, args.features, space);
  check(!train_data.empty(), "no training utterances");

  ModelConfig mcfg = ModelConfig::defaults(parse_model_kind(args.model), space.size(),
                                           train_data[0].feat.cols);
  if (!args.units.empty()) {
    check(args.units.size() == 4, "--units needs 4 values");
    mcfg.units = args.units;
  }
  if (!args.channels.empty()) {
    check(args.channels.size() == 4, "--channels needs 4 values");
    mcfg.channels = args.channels;
  }
  if (!args.dilations.empty()) {
    check(args.dilations.size() == 4, "--dilations needs 4 values");
    mcfg.dilations = args.dilations;
  }
  mcfg.init_seed = args.init_seed;

  TrainConfig cfg;
  cfg.objective = objective;
  cfg.selection = args.select == "eer" ? Selection::dev_eer : Selection::dev_acc;
  cfg.epochs = args.epochs;
  if (args.batch != 0) {
    cfg.batch_size = args.batch;
  } else if (mcfg.kind == ModelKind::meanstd_resnet) {
    cfg.batch_size = train_data[0].feat.kind == FeatureKind::logspec ? 32 : 64;
  } else {
    cfg.batch_size = 64;
  }
  cfg.optimizer.peak_lr = args.peak_lr;
  cfg.optimizer.warmup_steps = args.warmup;
  cfg.optimizer.weight_decay = args.weight_decay;
  cfg.segmenter = {args.seg_m, args.seg_l};
  cfg.seed = args.seed;

  Model<float> model(mcfg);
  std::cout << model_kind_name(mcfg.kind) << ": " << model.parameter_count()
            << " trainable parameters, " << train_data.size() << " train / "
            << dev_data.size() << " dev utterances\n";
  const TrainResult result = train(model, train_data, dev_data, space, cfg);
  for (const EpochReport& r : result.reports) std::cout << format_epoch_report(r) << "\n";

  save_checkpoint(args.ckpt, result.best);
  std::cout << "checkpoint (epoch " << result.best.meta.epoch << ", "
            << result.best.meta.selection << "=" << result.best.meta.selection_value
            << ") written to " << args.ckpt << "\n";
  if (!args.epoch_log.empty()) write_epoch_log(args.epoch_log, result.reports);
  return 0;
}

int run_score(const ScoreArgs& args) {
  const Snapshot snap = load_checkpoint(args.ckpt);
  auto model = model_from_snapshot(snap);
  const Protocol protocol = read_protocol_file(args.protocol);
  // binary checkpoints put bonafide second, multi-class ones first
  const std::size_t bonafide_index = snap.config.n_classes == 2 ? 1 : 0;
  const SegmenterConfig seg{args.seg_m, args.seg_l};
  const ScoreSet scores = score_protocol(*model, protocol, args.features, seg, bonafide_index);
  write_score_file(args.out, scores);
  std::cout << "scored " << scores.entries.size() << " utterances into " << args.out << "\n";
  return 0;
}

int run_eval(const EvalArgs& args) {
  const ScoreSet scores = read_score_file(args.scores);
  const Protocol protocol = read_protocol_file(args.protocol);
  const MetricReport report = evaluate_scores(scores, protocol, args.tdcf);
  std::printf("EER %.4f %%\n", 100.0 * report.eer);
  std::printf("min t-DCF %.4f\n", report.min_tdcf_norm);
  std::printf("RESULT eer=%.17g eer_threshold=%.17g min_tdcf=%.17g tdcf_threshold=%.17g\n",
              report.eer, report.eer_threshold, report.min_tdcf_norm,
              report.threshold_at_min);
  return 0;
}

int run_fuse(const FuseArgs& args) {
  check(!args.scores.empty(), "fuse: need at least one score file");
  check(args.metric == "tdcf" || args.metric == "eer", "unknown metric '", args.metric, "'");
  const Protocol protocol = read_protocol_file(args.protocol);
  std::vector<std::pair<std::string, ScoreSet>> systems;
  for (const std::string& path : args.scores)
    systems.emplace_back(fs::path(path).stem().string(), read_score_file(path));

  const FusionPlan plan = greedy_select(
      systems, protocol, args.cal, args.tdcf,
      args.metric == "tdcf" ? FusionMetric::min_tdcf : FusionMetric::eer);
  for (std::size_t i = 0; i < plan.steps.size(); ++i)
    std::printf("step %zu: %s  dev_eer=%.6f dev_min_tdcf=%.6f\n", i + 1,
                plan.steps[i].system.c_str(), plan.steps[i].dev_eer,
                plan.steps[i].dev_min_tdcf);

  if (!args.out.empty()) {
    write_score_file(args.out, apply_fusion(plan, systems, protocol));
    std::cout << "fused scores written to " << args.out << "\n";
  }
  if (!args.report.empty()) write_fusion_report(args.report, plan);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"assertkit: anti-spoofing pipeline (synthetic corpus, spectral features,\n"
               "SE/residual networks, EER and t-DCF scoring, calibration and fusion)"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate the deterministic synthetic corpus");
  synth->set_config("--config");
  synth->add_option("--mode", synth_args.mode, "PA or LA")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--n-bonafide", synth_args.cfg.n_bonafide, "Bonafide utterances")
      ->capture_default_str();
  synth->add_option("--spoof-per-class", synth_args.cfg.spoof_per_class,
                    "Spoof utterances per attack class")
      ->capture_default_str();
  synth->add_option("--dur-min", synth_args.dur_min, "Minimum duration, seconds")
      ->capture_default_str();
  synth->add_option("--dur-max", synth_args.dur_max, "Maximum duration, seconds")
      ->capture_default_str();
  synth->add_option("--sample-rate", synth_args.cfg.sample_rate, "Sample rate, Hz")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.cfg.seed, "Corpus seed")->capture_default_str();
  synth->add_option("--prefix", synth_args.cfg.utt_prefix, "Utterance id prefix");

  ExtractArgs extract_args;
  CLI::App* extract = app.add_subcommand("extract", "Extract logspec or CQCC features");
  extract->set_config("--config");
  extract->add_option("--feature", extract_args.feature, "logspec or cqcc")
      ->capture_default_str();
  extract->add_option("--protocol", extract_args.protocol, "Protocol file")->required();
  extract->add_option("--wav-dir", extract_args.wav_dir, "Directory with <utt_id>.wav")
      ->required();
  extract->add_option("--out", extract_args.out, "Feature output directory")->required();
  extract->add_option("--fft", extract_args.stft.fft_size, "FFT size")->capture_default_str();
  extract->add_option("--win", extract_args.stft.win_length, "Window length, samples")
      ->capture_default_str();
  extract->add_option("--hop", extract_args.stft.hop_length, "Hop length, samples")
      ->capture_default_str();
  extract->add_option("--window", extract_args.window, "hamming or hann")
      ->capture_default_str();
  extract->add_option("--floor-eps", extract_args.stft.floor_eps, "Log floor epsilon")
      ->capture_default_str();
  extract->add_option("--bins-per-octave", extract_args.cqcc_cfg.bins_per_octave,
                      "CQT bins per octave")
      ->capture_default_str();
  extract->add_option("--fmin", extract_args.cqcc_cfg.f_min, "CQT f_min (0: f_max/2^9)");
  extract->add_option("--fmax", extract_args.cqcc_cfg.f_max, "CQT f_max (0: Nyquist)");
  extract->add_option("--n-ceps", extract_args.cqcc_cfg.n_ceps, "Cepstral coefficients")
      ->capture_default_str();
  extract->add_option("--resample-points", extract_args.cqcc_cfg.resample_points,
                      "Uniform resampling points per octave")
      ->capture_default_str();

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->set_config("--config");
  train_cmd->add_option("--model", train_args.model,
                        "senet34|senet50|meanstd_resnet|dilated_resnet|afn")
      ->capture_default_str();
  train_cmd->add_option("--mode", train_args.mode, "PA or LA")->capture_default_str();
  train_cmd->add_option("--objective", train_args.objective, "binary or multiclass")
      ->capture_default_str();
  train_cmd->add_option("--select", train_args.select, "Model selection: eer or acc")
      ->capture_default_str();
  train_cmd->add_option("--features", train_args.features, "Feature directory")->required();
  train_cmd->add_option("--train-protocol", train_args.train_protocol, "Training protocol")
      ->required();
  train_cmd->add_option("--dev-protocol", train_args.dev_protocol, "Development protocol")
      ->required();
  train_cmd->add_option("--ckpt", train_args.ckpt, "Checkpoint output path")->required();
  train_cmd->add_option("--epoch-log", train_args.epoch_log, "Epoch report log path");
  train_cmd->add_option("--epochs", train_args.epochs, "Training epochs")
      ->capture_default_str();
  train_cmd->add_option("--batch", train_args.batch,
                        "Batch size (0: 64, or 32 for whole-utterance logspec)");
  train_cmd->add_option("--seed", train_args.seed, "Shuffling seed")->capture_default_str();
  train_cmd->add_option("--init-seed", train_args.init_seed, "Weight init seed")
      ->capture_default_str();
  train_cmd->add_option("--peak-lr", train_args.peak_lr, "Schedule peak learning rate")
      ->capture_default_str();
  train_cmd->add_option("--warmup", train_args.warmup, "Warm-up steps")
      ->capture_default_str();
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "L2 weight decay")
      ->capture_default_str();
  train_cmd->add_option("--M", train_args.seg_m, "Segment length, frames")
      ->capture_default_str();
  train_cmd->add_option("--L", train_args.seg_l, "Segment overlap, frames")
      ->capture_default_str();
  train_cmd->add_option("--units", train_args.units, "Residual units per block (4 values)")
      ->expected(4);
  train_cmd->add_option("--channels", train_args.channels, "Channels per block (4 values)")
      ->expected(4);
  train_cmd->add_option("--dilations", train_args.dilations, "Dilation per block (4 values)")
      ->expected(4);

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "Score a protocol with a checkpoint");
  score->set_config("--config");
  score->add_option("--ckpt", score_args.ckpt, "Checkpoint path")->required();
  score->add_option("--features", score_args.features, "Feature directory")->required();
  score->add_option("--protocol", score_args.protocol, "Protocol file")->required();
  score->add_option("--out", score_args.out, "Score file output path")->required();
  score->add_option("--M", score_args.seg_m, "Segment length, frames")->capture_default_str();
  score->add_option("--L", score_args.seg_l, "Segment overlap, frames")
      ->capture_default_str();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Report EER and min normalized t-DCF");
  eval->set_config("--config");
  eval->add_option("--scores", eval_args.scores, "Score file")->required();
  eval->add_option("--protocol", eval_args.protocol, "Protocol file")->required();
  add_tdcf_options(eval, eval_args.tdcf);

  FuseArgs fuse_args;
  CLI::App* fuse = app.add_subcommand("fuse", "Greedy fusion with calibration");
  fuse->set_config("--config");
  fuse->add_option("--scores", fuse_args.scores, "Score files to fuse")
      ->required()
      ->expected(-1);
  fuse->add_option("--protocol", fuse_args.protocol, "Protocol file")->required();
  fuse->add_option("--prior", fuse_args.cal.effective_prior,
                   "Effective prior (0.672 PA, 0.707 LA)")
      ->capture_default_str();
  fuse->add_option("--metric", fuse_args.metric, "Greedy step metric: tdcf or eer")
      ->capture_default_str();
  fuse->add_option("--greedy-tol", fuse_args.cal.greedy_tol,
                   "Required absolute metric improvement")
      ->capture_default_str();
  fuse->add_option("--out", fuse_args.out, "Fused score file output path");
  fuse->add_option("--report", fuse_args.report, "Fusion report output path");
  add_tdcf_options(fuse, fuse_args.tdcf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (extract->parsed()) return run_extract(extract_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (score->parsed()) return run_score(score_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (fuse->parsed()) return run_fuse(fuse_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
