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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cytocascade/common/io.hpp"
#include "cytocascade/eval/plot.hpp"
#include "cytocascade/eval/report.hpp"
#include "cytocascade/nn/checkpoint.hpp"
#include "cytocascade/nn/descriptor.hpp"
#include "cytocascade/predictor/predictor.hpp"
#include "cytocascade/roi/detector.hpp"
#include "cytocascade/roi/heatmap.hpp"
#include "cytocascade/slide_store/png_codec.hpp"
#include "cytocascade/synth/synth.hpp"

namespace cyto::cli {

inline constexpr const char* kVersion = "0.1.0";

// Every tunable of a run. Serialized in full into each run manifest.
struct RunConfig {
  // paths
  fs::path dataset;
  fs::path out;
  fs::path detector;
  fs::path predictor;
  fs::path predictions;
  fs::path heatmaps;

  // patch grid; stride 0 means "equal to patch_w"
  int patch_w = 32;
  int patch_h = 32;
  int stride = 0;
  std::size_t m_tilde_train = 1000;
  std::size_t m_tilde_test = 100;
  std::string descriptor = "desk";

  // optimizer
  double learning_rate = 0.001;
  double momentum = 0.99;
  double weight_decay = 1e-7;
  int batch_size = 32;
  int roi_epochs = 3;
  int pred_epochs = 6;

  std::uint64_t rng_seed = 1;
  int negatives_per_positive = 3;
  double occupancy_threshold = 0.1;
  int positive_jitter = -1;
  double min_roi_score = 0.5;
  double ordinal_weight = 1.0;
  bool shuffle_labels = false;
  int workers = 1;

  // synthetic data
  std::size_t slides = 20;
  double benign = 0.5;
  std::size_t test_slides = 0;
  int slide_size = 1024;
  int n_groups = 20;
  double class_signal = 0.9;
  double tbs_noise = 0.1;
  int tile_size = 256;

  int effective_stride() const { return stride > 0 ? stride : patch_w; }

  void validate() const {
    CYTO_CHECK(patch_w > 0 && patch_h > 0, ConfigError, "patch size must be positive");
    CYTO_CHECK(stride >= 0, ConfigError, "stride must be >= 0");
    CYTO_CHECK(m_tilde_train >= 1 && m_tilde_test >= 1, ConfigError, "m_tilde values must be >= 1");
    CYTO_CHECK(workers >= 1, ConfigError, "workers must be >= 1");
    CYTO_CHECK(roi_epochs >= 1 && pred_epochs >= 1, ConfigError, "epoch counts must be >= 1");
    CYTO_CHECK(occupancy_threshold >= 0.0 && occupancy_threshold <= 1.0, ConfigError,
               "occupancy_threshold must be in [0,1]");
    sgd(1).validate();
    nn::descriptor_by_name(descriptor).validate(3, patch_h, patch_w);
    predictor_config().validate();
  }

  nn::SgdConfig sgd(int epochs) const {
    nn::SgdConfig s;
    s.learning_rate = learning_rate;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    s.batch_size = batch_size;
    s.epochs = epochs;
    s.rng_seed = rng_seed;
    return s;
  }

  roi::RoiConfig roi_config() const {
    roi::RoiConfig r;
    r.patch_w = patch_w;
    r.patch_h = patch_h;
    r.stride = effective_stride();
    r.negatives_per_positive = negatives_per_positive;
    r.occupancy_threshold = occupancy_threshold;
    r.positive_jitter = positive_jitter;
    r.rng_seed = rng_seed;
    r.workers = workers;
    return r;
  }

  pred::PredictorConfig predictor_config() const {
    pred::PredictorConfig p;
    p.patch_w = patch_w;
    p.patch_h = patch_h;
    p.stride = effective_stride();
    p.m_tilde_train = m_tilde_train;
    p.m_tilde_test = m_tilde_test;
    p.min_roi_score = min_roi_score;
    p.ordinal_weight = ordinal_weight;
    p.workers = workers;
    p.shuffle_labels = shuffle_labels;
    p.shuffle_seed = hash_values(rng_seed, 0x5a1dULL);
    return p;
  }

  synth::SynthSpec synth_spec() const {
    synth::SynthSpec s;
    s.rng_seed = rng_seed;
    s.slide_w = slide_size;
    s.slide_h = slide_size;
    s.n_groups = n_groups;
    s.class_signal = class_signal;
    s.tbs_noise = tbs_noise;
    s.tile_size = tile_size;
    return s;
  }

  // Settings that influence results. `workers` is left out: outputs do not
  // depend on it.
  std::string to_text() const {
    std::ostringstream os;
    os << "dataset " << dataset.generic_string() << "\n"
       << "out " << out.generic_string() << "\n"
       << "detector " << detector.generic_string() << "\n"
       << "predictor " << predictor.generic_string() << "\n"
       << "predictions " << predictions.generic_string() << "\n"
       << "heatmaps " << heatmaps.generic_string() << "\n"
       << "patch_w " << patch_w << "\n"
       << "patch_h " << patch_h << "\n"
       << "stride " << effective_stride() << "\n"
       << "m_tilde_train " << m_tilde_train << "\n"
       << "m_tilde_test " << m_tilde_test << "\n"
       << "descriptor " << descriptor << "\n"
       << "descriptor_layers " << nn::descriptor_by_name(descriptor).to_string() << "\n"
       << "learning_rate " << format_real(learning_rate) << "\n"
       << "momentum " << format_real(momentum) << "\n"
       << "weight_decay " << format_real(weight_decay) << "\n"
       << "batch_size " << batch_size << "\n"
       << "roi_epochs " << roi_epochs << "\n"
       << "pred_epochs " << pred_epochs << "\n"
       << "rng_seed " << rng_seed << "\n"
       << "negatives_per_positive " << negatives_per_positive << "\n"
       << "occupancy_threshold " << format_real(occupancy_threshold) << "\n"
       << "positive_jitter " << positive_jitter << "\n"
       << "min_roi_score " << format_real(min_roi_score) << "\n"
       << "ordinal_weight " << format_real(ordinal_weight) << "\n"
       << "shuffle_labels " << (shuffle_labels ? 1 : 0) << "\n"
       << "slides " << slides << "\n"
       << "benign " << format_real(benign) << "\n"
       << "test_slides " << test_slides << "\n"
       << "slide_size " << slide_size << "\n"
       << "n_groups " << n_groups << "\n"
       << "class_signal " << format_real(class_signal) << "\n"
       << "tbs_noise " << format_real(tbs_noise) << "\n"
       << "tile_size " << tile_size << "\n";
    return os.str();
  }

  // Identifies the experiment, so the output location is not part of it.
  std::uint64_t hash() const {
    RunConfig c = *this;
    c.out.clear();
    return fnv1a64(c.to_text());
  }
};

// A file the run read, identified by content checksum.
struct RunInput {
  std::string role;
  fs::path path;
};

inline std::string file_checksum(const fs::path& p) {
  if (!fs::is_regular_file(p)) return "missing";
  const auto bytes = read_text_file(p);
  return hex32(crc32_of({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()}));
}

// Deterministic run description. Wall time goes to a separate file so that a
// rerun reproduces this one byte for byte.
inline void write_run_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                               const std::vector<RunInput>& inputs) {
  fs::create_directories(dir);
  std::ostringstream os;
  os << "# cytocascade run manifest\n"
     << "command " << command << "\n"
     << "version " << kVersion << "\n"
     << "config_hash " << hex64(cfg.hash()) << "\n"
     << "seed " << cfg.rng_seed << "\n";
  for (const auto& in : inputs) {
    os << "input " << in.role << " " << in.path.generic_string() << " " << file_checksum(in.path) << "\n";
  }
  os << cfg.to_text();
  write_text_file(dir / ("run_manifest." + command + ".txt"), os.str());
}

inline void write_run_timing(const fs::path& dir, const std::string& command, double seconds, int workers) {
  fs::create_directories(dir);
  std::ostringstream os;
  os << "command " << command << "\n"
     << "workers " << workers << "\n"
     << "wall_seconds " << format_real(seconds) << "\n";
  write_text_file(dir / ("run_timing." + command + ".txt"), os.str());
}

inline std::string format_train_log(const nn::TrainLog& log) {
  std::ostringstream os;
  os << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) os << e << "," << format_real(log.epoch_loss[e]) << "\n";
  return os.str();
}

// ---- synth ----------------------------------------------------------------

struct SynthOutput {
  Dataset all;
  Dataset train;
  Dataset test;
};

// Generates cfg.slides slides into cfg.out; the last cfg.test_slides form the
// test split (slide classes are already shuffled by the generator).
inline SynthOutput run_synth(const RunConfig& cfg) {
  CYTO_CHECK(cfg.slides >= 1, ConfigError, "slides must be >= 1");
  CYTO_CHECK(cfg.test_slides < cfg.slides, ConfigError, "test_slides must be smaller than slides");
  SynthOutput o;
  o.all = synth::generate_dataset(cfg.synth_spec(), cfg.slides, cfg.benign, cfg.out, cfg.workers);
  const auto n_train = cfg.slides - cfg.test_slides;
  o.train = o.all.subset(0, n_train);
  o.test = o.all.subset(n_train, cfg.slides);
  o.train.save(cfg.out / "train.tsv");
  o.test.save(cfg.out / "test.tsv");
  return o;
}

// ---- detector -----------------------------------------------------------------

struct DetectorTraining {
  roi::Model model;
  nn::TrainLog log;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t flagged = 0;
};

inline DetectorTraining run_train_roi(const Dataset& train, const RunConfig& cfg,
                                      const std::function<void(int, double)>& on_epoch = {}) {
  const auto set = roi::build_trainset(train, cfg.roi_config());
  DetectorTraining t{roi::train_roi(set, nn::descriptor_by_name(cfg.descriptor), cfg.sgd(cfg.roi_epochs), nullptr,
                                    on_epoch),
                     {}, set.positives, set.negatives, set.flagged_negatives};
  return t;
}

inline roi::Model load_detector(const fs::path& path) { return nn::load_checkpoint<float>(path).model; }

inline PatchGrid grid_for(const SlideContainer& c, const RunConfig& cfg) {
  return make_grid(c, cfg.patch_w, cfg.patch_h, cfg.effective_stride());
}

// Heatmap, grayscale rendering and top-M selection for every slide.
inline void run_detect(const Dataset& ds, const roi::Model& detector, const RunConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& e : ds.entries()) {
    const auto c = SlideContainer::open_shared(e.container);
    const auto hm = roi::score_slide(detector, *c, grid_for(*c, cfg), cfg.workers);
    roi::save_heatmap(out_dir / (e.slide_id + ".heat"), hm);
    write_png(out_dir / (e.slide_id + ".png"), roi::render_heatmap(hm));
    const auto sel = roi::select_top(hm, cfg.m_tilde_test);
    write_text_file(out_dir / (e.slide_id + ".selection.txt"), roi::format_selection(sel));
  }
}

// Overlay and detected-region gallery for every slide with a saved heatmap.
inline void run_heatmap_render(const Dataset& ds, const RunConfig& cfg, const fs::path& heat_dir,
                               const fs::path& out_dir, std::size_t gallery_size = 32) {
  fs::create_directories(out_dir);
  for (const auto& e : ds.entries()) {
    const auto hm = roi::load_heatmap(heat_dir / (e.slide_id + ".heat"));
    const auto c = SlideContainer::open_shared(e.container);
    check_grid(*c, hm.grid);
    const auto sel = roi::select_top(hm, cfg.m_tilde_test);
    write_png(out_dir / (e.slide_id + "_overlay.png"), eval::render_heatmap_overlay(*c, hm, sel.regions));
    std::vector<Image> crops;
    std::vector<float> scores;
    for (std::size_t i = 0; i < std::min(gallery_size, sel.regions.size()); ++i) {
      crops.push_back(c->read_region(sel.regions[i].origin, hm.grid.patch_w(), hm.grid.patch_h()));
      scores.push_back(sel.regions[i].score);
    }
    write_png(out_dir / (e.slide_id + "_gallery.png"), eval::render_gallery(crops, scores));
  }
}

// ---- predictor ----------------------------------------------------------------

inline pred::PredictorTrainResult run_train_pred(const Dataset& train, const roi::Model& detector,
                                                 const RunConfig& cfg,
                                                 const std::function<void(const pred::OrdinalThresholds&)>& on_step = {},
                                                 const std::function<void(int, double)>& on_epoch = {}) {
  return pred::train_predictor(train, detector, nn::descriptor_by_name(cfg.descriptor), cfg.sgd(cfg.pred_epochs),
                               cfg.predictor_config(), on_step, on_epoch);
}

struct SlideResult {
  std::string slide_id;
  std::optional<pred::SlidePrediction> prediction;  // empty when non-diagnostic
  std::string reason;
  std::string record;  // text written to <slide_id>.txt
};

// One record per slide; a non-diagnostic slide is reported and the batch goes on.
inline std::vector<SlideResult> run_predict(const Dataset& ds, const roi::Model& detector,
                                            const pred::PredictorBundle& bundle, const RunConfig& cfg) {
  const auto pc = cfg.predictor_config();
  std::vector<SlideResult> out;
  for (const auto& e : ds.entries()) {
    const auto c = SlideContainer::open_shared(e.container);
    SlideResult r;
    r.slide_id = e.slide_id;
    try {
      r.prediction = pred::predict_slide(detector, bundle, *c, grid_for(*c, cfg), pc);
      r.record = pred::format_prediction(*r.prediction);
    } catch (const NonDiagnosticError& err) {
      r.reason = err.what();
      r.record = pred::format_non_diagnostic(e.slide_id, pc.m_tilde_test, r.reason);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_predictions(const fs::path& dir, const std::vector<SlideResult>& results) {
  fs::create_directories(dir);
  std::ostringstream summary;
  summary << "slide_id\tstatus\tg_bar\tp_malignant\ttbs_hat\tm_used\n";
  for (const auto& r : results) {
    write_text_file(dir / (r.slide_id + ".txt"), r.record);
    summary << r.slide_id << "\t";
    if (r.prediction) {
      const auto& p = *r.prediction;
      summary << "ok\t" << format_real(p.g_bar) << "\t" << format_real(p.p_malignant) << "\t" << p.tbs_hat << "\t"
              << p.patches.size() << "\n";
    } else {
      summary << "non-diagnostic\t-\t-\t-\t0\n";
    }
  }
  write_text_file(dir / "predictions.tsv", summary.str());
}

// Joins the dataset with per-slide records found in `pred_dir`.
inline std::vector<eval::SlideOutcome> load_outcomes(const Dataset& ds, const fs::path& pred_dir) {
  std::vector<eval::SlideOutcome> out;
  for (const auto& e : ds.entries()) {
    const auto path = pred_dir / (e.slide_id + ".txt");
    if (!fs::exists(path)) throw IoError("no prediction record for slide '" + e.slide_id + "' in " + pred_dir.string());
    const auto p = pred::parse_prediction(read_text_file(path));
    eval::SlideOutcome o{e.slide_id, e.malignant, e.tbs, p.has_value(), 0.0, 2};
    if (p) {
      if (p->slide_id != e.slide_id) throw IoError("record " + path.string() + " names slide '" + p->slide_id + "'");
      o.g_bar = p->g_bar;
      o.tbs_hat = p->tbs_hat;
    }
    out.push_back(o);
  }
  return out;
}

inline std::vector<eval::SlideOutcome> outcomes_of(const Dataset& ds, const std::vector<SlideResult>& results) {
  CYTO_CHECK(ds.size() == results.size(), ShapeError, "one result per dataset slide expected");
  std::vector<eval::SlideOutcome> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& e = ds[i];
    const auto& r = results[i];
    CYTO_CHECK(e.slide_id == r.slide_id, ConfigError, "result order does not match the dataset");
    eval::SlideOutcome o{e.slide_id, e.malignant, e.tbs, r.prediction.has_value(), 0.0, 2};
    if (r.prediction) {
      o.g_bar = r.prediction->g_bar;
      o.tbs_hat = r.prediction->tbs_hat;
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace cyto::cli
