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

#include <algorithm>
#include <cstdint>
#include <array>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/io.hpp"
#include "cytocascade/common/parallel.hpp"
#include "cytocascade/nn/checkpoint.hpp"
#include "cytocascade/nn/input.hpp"
#include "cytocascade/nn/loss.hpp"
#include "cytocascade/nn/trainer.hpp"
#include "cytocascade/predictor/ordinal.hpp"
#include "cytocascade/roi/detector.hpp"
#include "cytocascade/roi/heatmap.hpp"
#include "cytocascade/slide_store/dataset.hpp"
#include "cytocascade/slide_store/grid_stream.hpp"

namespace cyto::pred {

using Model = nn::ScorerModel<float>;

struct PredictorConfig {
  int patch_w = 32;
  int patch_h = 32;
  int stride = 32;
  std::size_t m_tilde_train = 1000;
  std::size_t m_tilde_test = 100;
  // Selected regions scoring below this detector probability are discarded;
  // a slide left with none is non-diagnostic.
  double min_roi_score = 0.5;
  double ordinal_weight = 1.0;
  int workers = 1;
  bool shuffle_labels = false;  // null-signal control: permute (Y, S) across slides
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    CYTO_CHECK(m_tilde_train >= 1 && m_tilde_test >= 1, ConfigError, "m_tilde values must be >= 1");
    CYTO_CHECK(min_roi_score >= 0.0 && min_roi_score <= 1.0, ConfigError, "min_roi_score must be in [0,1]");
    CYTO_CHECK(ordinal_weight >= 0.0, ConfigError, "ordinal_weight must be >= 0");
  }
};

struct PatchLogit {
  Origin origin;
  float roi_score = 0.0f;
  float logit = 0.0f;
};

struct SlidePrediction {
  std::string slide_id;
  double g_bar = 0.0;
  double p_malignant = 0.5;
  int tbs_hat = 2;
  std::size_t m_tilde = 0;  // requested
  std::vector<PatchLogit> patches;  // row-major by origin
};

// Mean logit with a fixed summation order (row-major by origin), so the
// result is bitwise independent of the order patches arrive in.
inline double mean_logit(std::vector<PatchLogit> patches) {
  CYTO_CHECK(!patches.empty(), NonDiagnosticError, "no patches to aggregate");
  std::sort(patches.begin(), patches.end(),
            [](const PatchLogit& a, const PatchLogit& b) { return row_major_less(a.origin, b.origin); });
  double sum = 0.0;
  for (const auto& p : patches) sum += p.logit;
  return sum / static_cast<double>(patches.size());
}

// Detector-selected regions of one slide: top m_tilde cells that also reach
// min_roi_score, returned in row-major order.
inline std::vector<roi::SelectedRegion> informative_regions(const roi::HeatMap& hm, std::size_t m_tilde,
                                                            double min_roi_score) {
  if (hm.grid.count() == 0) throw NonDiagnosticError("slide " + hm.slide_id + " has no grid patches");
  auto sel = roi::select_top(hm, m_tilde);
  std::vector<roi::SelectedRegion> kept;
  for (const auto& r : sel.regions) {
    if (r.score >= min_roi_score) kept.push_back(r);
  }
  std::sort(kept.begin(), kept.end(),
            [](const roi::SelectedRegion& a, const roi::SelectedRegion& b) { return a.index < b.index; });
  return kept;
}

// Eval-mode logits for images in fixed-size chunks.
inline std::vector<float> logits_of(const Model& net, const std::vector<const Image*>& images, int workers) {
  std::vector<float> out(images.size());
  parallel_chunks(images.size(), roi::kScoreChunk, workers, [&](std::size_t b, std::size_t e) {
    const auto logits = net.infer(nn::images_to_tensor(std::span(images).subspan(b, e - b)));
    for (std::size_t i = b; i < e; ++i) out[i] = logits[i - b];
  });
  return out;
}

struct PredictorBundle {
  Model net;
  OrdinalThresholds thresholds;
};

// Aggregates predictor logits over the informative top regions of an
// existing heatmap and decodes the TBS category.
inline SlidePrediction predict_from_heatmap(const roi::HeatMap& hm, const PredictorBundle& predictor,
                                            const SlideContainer& container, const PredictorConfig& cfg) {
  const PatchGrid& grid = hm.grid;
  check_grid(container, grid);
  CYTO_CHECK(hm.slide_id == container.slide_id(), ConfigError,
             "heatmap for '" + hm.slide_id + "' applied to slide '" + container.slide_id() + "'");
  const auto regions = informative_regions(hm, cfg.m_tilde_test, cfg.min_roi_score);
  if (regions.empty()) {
    throw NonDiagnosticError("slide " + container.slide_id() + ": no region reaches detector score " +
                             format_real(cfg.min_roi_score));
  }
  std::vector<Image> pixels;
  pixels.reserve(regions.size());
  for (const auto& r : regions) pixels.push_back(container.read_region(r.origin, grid.patch_w(), grid.patch_h()));
  std::vector<const Image*> ptrs;
  for (const auto& p : pixels) ptrs.push_back(&p);
  const auto logits = logits_of(predictor.net, ptrs, cfg.workers);
  SlidePrediction out;
  out.slide_id = container.slide_id();
  out.m_tilde = cfg.m_tilde_test;
  for (std::size_t i = 0; i < regions.size(); ++i) out.patches.push_back({regions[i].origin, regions[i].score, logits[i]});
  out.g_bar = mean_logit(out.patches);
  out.p_malignant = nn::sigmoid(out.g_bar);
  out.tbs_hat = decode_tbs(out.g_bar, predictor.thresholds);
  return out;
}

// Scores a slide with the detector, then predicts from the resulting heatmap.
inline SlidePrediction predict_slide(const roi::Model& detector, const PredictorBundle& predictor,
                                     const SlideContainer& container, const PatchGrid& grid,
                                     const PredictorConfig& cfg) {
  return predict_from_heatmap(roi::score_slide(detector, container, grid, cfg.workers), predictor, container, cfg);
}

struct PredictorTrainResult {
  Model net;
  OrdinalThresholds thresholds;
  nn::TrainLog log;
  std::size_t training_patches = 0;
  std::vector<std::string> skipped_slides;  // non-diagnostic under the frozen detector
};

struct TrainingPatch {
  Image pixels;
  int malignant = 0;
  OrdinalLabels ordinal{};
};

// Extracts the frozen detector's informative regions from every slide and
// labels each with its slide's (Y, S).
inline std::vector<TrainingPatch> collect_training_patches(const Dataset& dataset, const roi::Model& detector,
                                                           const PredictorConfig& cfg,
                                                           std::vector<std::string>* skipped = nullptr) {
  std::vector<int> ys, ss;
  for (const auto& e : dataset.entries()) {
    ys.push_back(e.malignant);
    ss.push_back(e.tbs);
  }
  if (cfg.shuffle_labels) {
    std::vector<std::size_t> perm(ys.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(hash_values(cfg.shuffle_seed, 0x5417ULL));
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<int> y2(ys.size()), s2(ss.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      y2[i] = ys[perm[i]];
      s2[i] = ss[perm[i]];
    }
    ys = std::move(y2);
    ss = std::move(s2);
  }
  std::vector<std::vector<TrainingPatch>> per_slide(dataset.size());
  std::vector<char> was_skipped(dataset.size(), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& e = dataset[i];
    const auto container = SlideContainer::open_shared(e.container);
    const PatchGrid grid = make_grid(*container, cfg.patch_w, cfg.patch_h, cfg.stride);
    if (grid.count() == 0) throw ConfigError("slide " + e.slide_id + " has no grid patches");
    const auto hm = roi::score_slide(detector, *container, grid, cfg.workers);
    const auto regions = informative_regions(hm, cfg.m_tilde_train, cfg.min_roi_score);
    if (regions.empty()) {
      was_skipped[i] = 1;
      continue;
    }
    const auto labels = encode_tbs(ss[i]);
    for (const auto& r : regions) {
      per_slide[i].push_back({container->read_region(r.origin, cfg.patch_w, cfg.patch_h), ys[i], labels});
    }
  }
  std::vector<TrainingPatch> out;
  for (std::size_t i = 0; i < per_slide.size(); ++i) {
    if (was_skipped[i] && skipped) skipped->push_back(dataset[i].slide_id);
    for (auto& p : per_slide[i]) out.push_back(std::move(p));
  }
  return out;
}

// Trains g() and the thresholds jointly: every selected patch contributes
// one joint_loss term with its slide's labels; batch loss is the mean.
// on_step sees the thresholds after every update.
inline PredictorTrainResult train_on_patches(std::vector<TrainingPatch> patches, const nn::ArchitectureDescriptor& desc,
                                             const nn::SgdConfig& sgd, const PredictorConfig& cfg,
                                             const std::function<void(const OrdinalThresholds&)>& on_step = {},
                                             const std::function<void(int, double)>& on_epoch = {}) {
  cfg.validate();
  CYTO_CHECK(patches.size() >= 2, ConfigError, "predictor training needs at least two selected patches");
  PredictorTrainResult res{roi::make_model(desc, cfg.patch_w, cfg.patch_h, sgd.rng_seed), OrdinalThresholds(), {}, 0, {}};
  res.training_patches = patches.size();
  nn::Sgd<float> opt(sgd);
  std::array<double, kNumThresholds> th_grad{}, th_velocity{};
  res.log = nn::run_sgd(
      res.net, opt, patches.size(), sgd,
      [&](std::span<const std::size_t> idx) {
        std::vector<const Image*> imgs;
        for (auto i : idx) imgs.push_back(&patches[i].pixels);
        return nn::images_to_tensor(imgs);
      },
      [&](const nn::TensorF& logits, std::span<const std::size_t> idx, nn::TensorF& up) {
        th_grad.fill(0.0);
        double total = 0.0;
        const double inv = 1.0 / static_cast<double>(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const auto& p = patches[idx[k]];
          const auto jl = joint_loss(logits[k], p.malignant, p.ordinal, res.thresholds, cfg.ordinal_weight);
          total += jl.loss;
          up[k] = static_cast<float>(jl.d_logit * inv);
          for (int l = 0; l < kNumThresholds; ++l) th_grad[l] += jl.d_raw[l] * inv;
        }
        return total * inv;
      },
      [&] {
        nn::sgd_update<double>(res.thresholds.raw_mut(), th_grad, th_velocity, sgd);
        if (on_step) on_step(res.thresholds);
      },
      on_epoch);
  return res;
}

inline PredictorTrainResult train_predictor(const Dataset& dataset, const roi::Model& detector,
                                            const nn::ArchitectureDescriptor& desc, const nn::SgdConfig& sgd,
                                            const PredictorConfig& cfg,
                                            const std::function<void(const OrdinalThresholds&)>& on_step = {},
                                            const std::function<void(int, double)>& on_epoch = {}) {
  cfg.validate();
  std::vector<std::string> skipped;
  auto patches = collect_training_patches(dataset, detector, cfg, &skipped);
  auto res = train_on_patches(std::move(patches), desc, sgd, cfg, on_step, on_epoch);
  res.skipped_slides = std::move(skipped);
  return res;
}

inline constexpr const char* kThresholdExtra = "ordinal.raw";

inline void save_predictor(const fs::path& ckpt, Model& net, const OrdinalThresholds& th,
                           const std::vector<nn::TensorF>* velocity = nullptr) {
  nn::Extras extras;
  extras[kThresholdExtra] = {th.raw().begin(), th.raw().end()};
  nn::save_checkpoint(ckpt, net, velocity, extras);
}

inline PredictorBundle load_predictor(const fs::path& ckpt) {
  auto ck = nn::load_checkpoint<float>(ckpt);
  const auto it = ck.extras.find(kThresholdExtra);
  if (it == ck.extras.end() || it->second.size() != kNumThresholds) {
    throw IoError("checkpoint " + ckpt.string() + " carries no ordinal thresholds");
  }
  std::array<double, kNumThresholds> raw{};
  std::copy(it->second.begin(), it->second.end(), raw.begin());
  return {std::move(ck.model), OrdinalThresholds::from_raw(raw)};
}

inline std::string format_thresholds(const OrdinalThresholds& th) {
  std::ostringstream os;
  const auto taus = th.taus();
  os << "# ordinal thresholds tau_2..tau_5 and their raw parameters\n";
  for (int k = 0; k < kNumThresholds; ++k) os << "tau_" << (k + kMinTbs) << " " << format_real(taus[k]) << "\n";
  for (int k = 0; k < kNumThresholds; ++k) os << "raw_" << k << " " << format_real(th.raw()[k]) << "\n";
  return os.str();
}

// Line-oriented prediction record.
inline std::string format_prediction(const SlidePrediction& p) {
  std::ostringstream os;
  os << "slide_id " << p.slide_id << "\n"
     << "status ok\n"
     << "g_bar " << format_real(p.g_bar) << "\n"
     << "p_malignant " << format_real(p.p_malignant) << "\n"
     << "tbs_hat " << p.tbs_hat << "\n"
     << "m_tilde " << p.m_tilde << "\n"
     << "m_used " << p.patches.size() << "\n";
  for (const auto& q : p.patches) {
    os << "patch " << q.origin.x << " " << q.origin.y << " " << format_real(q.logit) << "\n";
  }
  return os.str();
}

inline std::string format_non_diagnostic(const std::string& slide_id, std::size_t m_tilde, const std::string& why) {
  std::ostringstream os;
  os << "slide_id " << slide_id << "\n"
     << "status non-diagnostic\n"
     << "m_tilde " << m_tilde << "\n"
     << "reason " << why << "\n";
  return os.str();
}

// Returns nullopt for non-diagnostic records.
inline std::optional<SlidePrediction> parse_prediction(std::string_view text) {
  const auto kv = KeyValueText::parse(text);
  if (kv.get("status") != "ok") return std::nullopt;
  SlidePrediction p;
  p.slide_id = kv.get("slide_id");
  p.g_bar = kv.get_as<double>("g_bar");
  p.p_malignant = kv.get_as<double>("p_malignant");
  p.tbs_hat = kv.get_as<int>("tbs_hat");
  p.m_tilde = kv.get_as<std::size_t>("m_tilde");
  for (const auto& line : kv.all("patch")) {
    const auto f = split_ws(line);
    if (f.size() != 3) throw IoError("bad patch line in prediction record");
    p.patches.push_back({{parse_number<int>(f[0], "x"), parse_number<int>(f[1], "y")}, 0.0f,
                         parse_number<float>(f[2], "logit")});
  }
  if (kv.get_as<std::size_t>("m_used") != p.patches.size()) throw IoError("prediction record patch count mismatch");
  return p;
}

}  // namespace cyto::pred
