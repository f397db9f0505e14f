// Copyright 2026 The cytocascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: synth, train-roi, detect, heatmap, train-pred, predict, eval.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cytocascade/cli/pipeline.hpp"

namespace {

using namespace cyto;
using cli::RunConfig;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void require(const fs::path& p, const char* flag, const std::string& cmd) {
  if (p.empty()) throw ConfigError(cmd + " needs " + flag);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_epoch(const char* what, int epoch, double loss) {
  std::cerr << what << " epoch " << epoch << " mean loss " << format_real(loss) << "\n";
}

void cmd_synth(const RunConfig& cfg) {
  require(cfg.out, "--out", "synth");
  const auto o = cli::run_synth(cfg);
  cli::write_run_manifest(cfg.out, "synth", cfg, {});
  std::cout << "wrote " << o.all.size() << " slides (" << o.train.size() << " train, " << o.test.size()
            << " test) to " << cfg.out.string() << "\n";
}

void cmd_train_roi(const RunConfig& cfg) {
  require(cfg.dataset, "--dataset", "train-roi");
  require(cfg.out, "--out", "train-roi");
  const auto ds = Dataset::load(cfg.dataset);
  nn::TrainLog log;
  auto t = cli::run_train_roi(ds, cfg, [&](int e, double l) {
    log.epoch_loss.push_back(l);
    log_epoch("detector", e, l);
  });
  fs::create_directories(cfg.out);
  nn::save_checkpoint(cfg.out / "detector.ckpt", t.model);
  write_text_file(cfg.out / "detector_train_log.csv", cli::format_train_log(log));
  cli::write_run_manifest(cfg.out, "train-roi", cfg, {{"dataset", cfg.dataset}});
  std::cout << "detector trained on " << t.positives << " positives, " << t.negatives << " negatives ("
            << t.flagged << " flagged)\n";
}

void cmd_detect(const RunConfig& cfg) {
  require(cfg.dataset, "--dataset", "detect");
  require(cfg.detector, "--detector", "detect");
  require(cfg.out, "--out", "detect");
  const auto ds = Dataset::load(cfg.dataset);
  const auto det = cli::load_detector(cfg.detector);
  cli::run_detect(ds, det, cfg, cfg.out / "heatmaps");
  cli::write_run_manifest(cfg.out, "detect", cfg, {{"dataset", cfg.dataset}, {"detector", cfg.detector}});
  std::cout << "wrote heatmaps for " << ds.size() << " slides\n";
}

void cmd_heatmap(const RunConfig& cfg) {
  require(cfg.dataset, "--dataset", "heatmap");
  require(cfg.heatmaps, "--heatmaps", "heatmap");
  require(cfg.out, "--out", "heatmap");
  const auto ds = Dataset::load(cfg.dataset);
  cli::run_heatmap_render(ds, cfg, cfg.heatmaps, cfg.out / "overlays");
  cli::write_run_manifest(cfg.out, "heatmap", cfg, {{"dataset", cfg.dataset}});
  std::cout << "rendered overlays for " << ds.size() << " slides\n";
}

void cmd_train_pred(const RunConfig& cfg) {
  require(cfg.dataset, "--dataset", "train-pred");
  require(cfg.detector, "--detector", "train-pred");
  require(cfg.out, "--out", "train-pred");
  const auto ds = Dataset::load(cfg.dataset);
  const auto det = cli::load_detector(cfg.detector);
  nn::TrainLog log;
  auto res = cli::run_train_pred(ds, det, cfg, {}, [&](int e, double l) {
    log.epoch_loss.push_back(l);
    log_epoch("predictor", e, l);
  });
  fs::create_directories(cfg.out);
  pred::save_predictor(cfg.out / "predictor.ckpt", res.net, res.thresholds);
  write_text_file(cfg.out / "thresholds.txt", pred::format_thresholds(res.thresholds));
  write_text_file(cfg.out / "predictor_train_log.csv", cli::format_train_log(log));
  std::string skipped;
  for (const auto& s : res.skipped_slides) skipped += s + "\n";
  write_text_file(cfg.out / "skipped_slides.txt", skipped);
  cli::write_run_manifest(cfg.out, "train-pred", cfg, {{"dataset", cfg.dataset}, {"detector", cfg.detector}});
  std::cout << "predictor trained on " << res.training_patches << " patches; " << res.skipped_slides.size()
            << " training slides had no informative region\n";
}

void cmd_predict(const RunConfig& cfg) {
  require(cfg.dataset, "--dataset", "predict");
  require(cfg.detector, "--detector", "predict");
  require(cfg.predictor, "--predictor", "predict");
  require(cfg.out, "--out", "predict");
  // Load everything before touching the output directory.
  const auto ds = Dataset::load(cfg.dataset);
  const auto det = cli::load_detector(cfg.detector);
  const auto bundle = pred::load_predictor(cfg.predictor);
  const auto results = cli::run_predict(ds, det, bundle, cfg);
  cli::write_predictions(cfg.out / "predictions", results);
  cli::write_run_manifest(cfg.out, "predict", cfg,
                          {{"dataset", cfg.dataset}, {"detector", cfg.detector}, {"predictor", cfg.predictor}});
  std::size_t nd = 0;
  for (const auto& r : results) {
    if (!r.prediction) {
      ++nd;
      std::cerr << "non-diagnostic: " << r.reason << "\n";
    }
  }
  std::cout << "predicted " << results.size() - nd << " slides, " << nd << " non-diagnostic\n";
}

void cmd_eval(const RunConfig& cfg) {
  require(cfg.dataset, "--dataset", "eval");
  require(cfg.predictions, "--predictions", "eval");
  require(cfg.out, "--out", "eval");
  const auto ds = Dataset::load(cfg.dataset);
  const auto outcomes = cli::load_outcomes(ds, cfg.predictions);
  const auto rep = eval::evaluate(outcomes);
  eval::write_report(cfg.out, rep, outcomes);
  cli::write_run_manifest(cfg.out, "eval", cfg, {{"dataset", cfg.dataset}});
  std::cout << eval::format_report(rep);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cytocascade: two-stage slide-level malignancy and TBS prediction"};
  app.set_version_flag("--version", std::string(cli::kVersion));
  app.set_config("--config", "", "INI/TOML file with option defaults; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  app.add_option("--dataset", cfg.dataset, "Dataset manifest (.tsv)");
  app.add_option("--out", cfg.out, "Output directory");
  app.add_option("--detector", cfg.detector, "Detector checkpoint");
  app.add_option("--predictor", cfg.predictor, "Predictor checkpoint");
  app.add_option("--predictions", cfg.predictions, "Directory of prediction records");
  app.add_option("--heatmaps", cfg.heatmaps, "Directory of saved heatmaps");

  app.add_option("--patch-w", cfg.patch_w, "Patch width")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--patch-h", cfg.patch_h, "Patch height")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--stride", cfg.stride, "Grid stride, 0 = patch width")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--m-tilde-train", cfg.m_tilde_train, "Top regions per training slide")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--m-tilde-test", cfg.m_tilde_test, "Top regions per test slide")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--descriptor", cfg.descriptor, "Scorer architecture")->capture_default_str()
      ->check(CLI::IsMember({"desk", "reference"}));
  app.add_option("--lr", cfg.learning_rate, "SGD learning rate")->capture_default_str();
  app.add_option("--momentum", cfg.momentum, "SGD momentum")->capture_default_str();
  app.add_option("--weight-decay", cfg.weight_decay, "SGD weight decay")->capture_default_str();
  app.add_option("--batch-size", cfg.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--roi-epochs", cfg.roi_epochs, "Detector epochs")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--pred-epochs", cfg.pred_epochs, "Predictor epochs")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.rng_seed, "Random seed")->capture_default_str();
  app.add_option("--negatives-per-positive", cfg.negatives_per_positive, "Detector negatives per positive")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--occupancy-threshold", cfg.occupancy_threshold, "Flag negatives above this annotation overlap")
      ->capture_default_str();
  app.add_option("--positive-jitter", cfg.positive_jitter, "Max positive crop shift, -1 = stride/2")
      ->capture_default_str();
  app.add_option("--min-roi-score", cfg.min_roi_score, "Detector score a selected region must reach")
      ->capture_default_str();
  app.add_option("--ordinal-weight", cfg.ordinal_weight, "Weight of the ordinal term")->capture_default_str();
  app.add_flag("--shuffle-labels", cfg.shuffle_labels, "Null control: permute slide labels before training");
  app.add_option("--workers", cfg.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  app.add_option("--slides", cfg.slides, "Slides to generate")->capture_default_str()->check(CLI::Range(1, 1000000));
  app.add_option("--benign", cfg.benign, "Benign fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--test-slides", cfg.test_slides, "Slides held out into test.tsv")->capture_default_str();
  app.add_option("--slide-size", cfg.slide_size, "Slide side length")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--groups", cfg.n_groups, "Follicular groups per slide")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--class-signal", cfg.class_signal, "Class signal strength")->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--tbs-noise", cfg.tbs_noise, "TBS label noise")->capture_default_str();
  app.add_option("--tile-size", cfg.tile_size, "Container tile size")->capture_default_str()
      ->check(CLI::IsMember({128, 256, 512}));

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"synth", "Generate a synthetic dataset", cmd_synth},
      {"train-roi", "Train the region detector", cmd_train_roi},
      {"detect", "Score slides with the detector and write heatmaps", cmd_detect},
      {"heatmap", "Render heatmap overlays and region galleries", cmd_heatmap},
      {"train-pred", "Train the malignancy predictor", cmd_train_pred},
      {"predict", "Predict malignancy and TBS per slide", cmd_predict},
      {"eval", "Compute metrics and plots from prediction records", cmd_eval},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto* sub = app.get_subcommands().front();
  try {
    cfg.validate();
    for (const auto& c : commands) {
      if (sub->get_name() == c.name) c.run(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  cli::write_run_timing(cfg.out, sub->get_name(), seconds_since(t0), cfg.workers);
  return EXIT_SUCCESS;
}
