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
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/parallel.hpp"
#include "cytocascade/common/rng.hpp"
#include "cytocascade/nn/checkpoint.hpp"
#include "cytocascade/nn/input.hpp"
#include "cytocascade/nn/loss.hpp"
#include "cytocascade/nn/model.hpp"
#include "cytocascade/nn/trainer.hpp"
#include "cytocascade/roi/heatmap.hpp"
#include "cytocascade/slide_store/container.hpp"
#include "cytocascade/slide_store/dataset.hpp"
#include "cytocascade/slide_store/grid_stream.hpp"

namespace cyto::roi {

using Model = nn::ScorerModel<float>;

// Patches per inference batch. Fixed so results never depend on worker count.
inline constexpr std::size_t kScoreChunk = 64;

struct RoiConfig {
  int patch_w = 32;
  int patch_h = 32;
  int stride = 32;
  int negatives_per_positive = 3;
  // A patch "contains" a group when annotation boxes cover at least this
  // fraction of it.
  double occupancy_threshold = 0.1;
  // Positive crops are shifted from the annotation center by up to this many
  // pixels per axis; -1 means stride / 2. Grid cells cut groups off-center,
  // so exactly centered positives teach the detector to reject them.
  int positive_jitter = -1;
  std::uint64_t rng_seed = 1;
  int workers = 1;
};

struct RoiSample {
  std::string slide_id;
  Origin origin;
  int label = 0;         // y_m
  bool flagged = false;  // negative that covers an annotation
};

struct RoiTrainSet {
  int patch_w = 0;
  int patch_h = 0;
  std::vector<RoiSample> samples;
  std::vector<Image> pixels;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t flagged_negatives = 0;

  double ratio() const { return positives ? static_cast<double>(negatives) / positives : 0.0; }
};

// Fraction of patch area covered by annotation boxes (boxes do not overlap
// in generated data; overlapping boxes are counted once per box).
inline double annotation_occupancy(const Region& patch, const std::vector<Region>& annotations) {
  long long covered = 0;
  for (const auto& a : annotations) covered += intersection_area(patch, a);
  return std::min(1.0, static_cast<double>(covered) / static_cast<double>(patch.area()));
}

// Patch of the given size centered on the annotation, shifted inside the slide.
inline Origin centered_origin(const Region& ann, int patch_w, int patch_h, int slide_w, int slide_h) {
  const int x = static_cast<int>(std::lround(ann.center_x() - patch_w / 2.0));
  const int y = static_cast<int>(std::lround(ann.center_y() - patch_h / 2.0));
  return {std::clamp(x, 0, slide_w - patch_w), std::clamp(y, 0, slide_h - patch_h)};
}

// Positives: one patch per annotation, centered on it up to a random shift of
// at most positive_jitter per axis (annotations whose centers share a grid
// cell are deduplicated). Negatives: negatives_per_positive
// uniform draws from the same slide's grid; draws covering an annotation are
// kept as negatives and flagged.
inline RoiTrainSet build_trainset(const Dataset& dataset, const RoiConfig& cfg) {
  CYTO_CHECK(cfg.negatives_per_positive >= 0, ConfigError, "negatives_per_positive must be >= 0");
  struct SlidePlan {
    std::vector<RoiSample> samples;
    std::vector<Image> pixels;
  };
  std::vector<SlidePlan> plans(dataset.size());
  parallel_for(dataset.size(), cfg.workers, [&](std::size_t i) {
    const auto& entry = dataset[i];
    if (entry.annotations.empty()) return;
    const auto annotations = load_annotations(entry.annotations);
    if (annotations.empty()) return;
    const auto container = SlideContainer::open_shared(entry.container);
    const PatchGrid grid = make_grid(*container, cfg.patch_w, cfg.patch_h, cfg.stride);
    if (grid.count() == 0) return;
    SlidePlan& plan = plans[i];
    std::vector<std::pair<int, int>> seen_cells;
    const int jitter = cfg.positive_jitter >= 0 ? cfg.positive_jitter : cfg.stride / 2;
    Rng jitter_rng(hash_values(cfg.rng_seed, 0x9051ULL, fnv1a64(entry.slide_id)));
    for (const auto& ann : annotations) {
      const std::pair<int, int> cell{static_cast<int>(ann.center_x()) / cfg.stride,
                                     static_cast<int>(ann.center_y()) / cfg.stride};
      if (std::find(seen_cells.begin(), seen_cells.end(), cell) != seen_cells.end()) continue;
      seen_cells.push_back(cell);
      Origin o = centered_origin(ann, cfg.patch_w, cfg.patch_h, container->width(), container->height());
      if (jitter > 0) {
        const auto span = static_cast<std::uint64_t>(2 * jitter + 1);
        o.x = std::clamp(o.x + static_cast<int>(jitter_rng.below(span)) - jitter, 0, container->width() - cfg.patch_w);
        o.y = std::clamp(o.y + static_cast<int>(jitter_rng.below(span)) - jitter, 0, container->height() - cfg.patch_h);
      }
      plan.samples.push_back({entry.slide_id, o, 1, false});
    }
    Rng rng(hash_values(cfg.rng_seed, 0x4e9ULL, fnv1a64(entry.slide_id)));
    const std::size_t n_neg = plan.samples.size() * static_cast<std::size_t>(cfg.negatives_per_positive);
    for (std::size_t k = 0; k < n_neg; ++k) {
      const Origin o = grid.origin(rng.below(grid.count()));
      const double occ = annotation_occupancy(Region{o.x, o.y, cfg.patch_w, cfg.patch_h}, annotations);
      plan.samples.push_back({entry.slide_id, o, 0, occ >= cfg.occupancy_threshold});
    }
    for (const auto& s : plan.samples) plan.pixels.push_back(container->read_region(s.origin, cfg.patch_w, cfg.patch_h));
  });
  RoiTrainSet set;
  set.patch_w = cfg.patch_w;
  set.patch_h = cfg.patch_h;
  for (auto& plan : plans) {
    for (std::size_t k = 0; k < plan.samples.size(); ++k) {
      const auto& s = plan.samples[k];
      (s.label ? set.positives : set.negatives)++;
      if (s.flagged) ++set.flagged_negatives;
      set.samples.push_back(s);
      set.pixels.push_back(std::move(plan.pixels[k]));
    }
  }
  if (set.positives == 0) throw ConfigError("no annotated regions in dataset; cannot build detector training set");
  return set;
}

// Null-signal control: permutes labels across samples.
inline void shuffle_labels(RoiTrainSet& set, std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& s : set.samples) labels.push_back(s.label);
  Rng rng(hash_values(seed, 0x5417ULL));
  rng.shuffle(std::span<int>(labels));
  for (std::size_t i = 0; i < labels.size(); ++i) set.samples[i].label = labels[i];
}

inline Model make_model(const nn::ArchitectureDescriptor& desc, int patch_w, int patch_h, std::uint64_t seed) {
  return Model(desc, 3, patch_h, patch_w, seed);
}

// Minimizes the mean BCE between sigma(logit) and y_m over the training set.
inline Model train_roi(const RoiTrainSet& set, const nn::ArchitectureDescriptor& desc, const nn::SgdConfig& sgd,
                       nn::TrainLog* log_out = nullptr,
                       const std::function<void(int, double)>& on_epoch = {}) {
  CYTO_CHECK(set.positives > 0 && set.negatives > 0, ConfigError, "detector training needs both classes");
  std::size_t pos = 0;
  for (const auto& s : set.samples) pos += static_cast<std::size_t>(s.label);
  CYTO_CHECK(pos > 0 && pos < set.samples.size(), ConfigError, "detector training needs both classes");
  Model model = make_model(desc, set.patch_w, set.patch_h, sgd.rng_seed);
  nn::Sgd<float> opt(sgd);
  const auto log = nn::run_sgd(
      model, opt, set.samples.size(), sgd,
      [&](std::span<const std::size_t> idx) {
        std::vector<const Image*> imgs;
        for (auto i : idx) imgs.push_back(&set.pixels[i]);
        return nn::images_to_tensor(imgs);
      },
      [&](const nn::TensorF& logits, std::span<const std::size_t> idx, nn::TensorF& up) {
        double total = 0.0;
        const double inv = 1.0 / static_cast<double>(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const double t = set.samples[idx[k]].label;
          total += nn::bce_with_logits(logits[k], t);
          up[k] = static_cast<float>(nn::bce_with_logits_grad(logits[k], t) * inv);
        }
        return total * inv;
      },
      [] {}, on_epoch);
  if (log_out) *log_out = log;
  return model;
}

// Eval-mode detector probabilities for a list of images, batched in fixed chunks.
inline std::vector<float> score_images(const Model& model, const std::vector<const Image*>& images, int workers) {
  std::vector<float> out(images.size());
  parallel_chunks(images.size(), kScoreChunk, workers, [&](std::size_t b, std::size_t e) {
    const auto logits = model.infer(nn::images_to_tensor(std::span(images).subspan(b, e - b)));
    for (std::size_t i = b; i < e; ++i) out[i] = static_cast<float>(nn::sigmoid(logits[i - b]));
  });
  return out;
}

// Detector probability for every grid cell of a slide.
inline HeatMap score_slide(const Model& model, const SlideContainer& container, const PatchGrid& grid,
                           int workers = 1) {
  check_grid(container, grid);
  const auto& in = model.input_shape();
  if (in[1] != grid.patch_h() || in[2] != grid.patch_w()) {
    throw ShapeError("detector expects " + std::to_string(in[2]) + "x" + std::to_string(in[1]) +
                     " patches, grid has " + std::to_string(grid.patch_w()) + "x" + std::to_string(grid.patch_h()));
  }
  HeatMap hm{container.slide_id(), grid, std::vector<float>(grid.count())};
  for_each_grid_chunk(container, grid, kScoreChunk, workers, [&](std::size_t first, std::vector<Patch> patches) {
    const auto logits = model.infer(nn::patches_to_tensor(patches));
    for (std::size_t k = 0; k < patches.size(); ++k) {
      hm.scores[first + k] = static_cast<float>(nn::sigmoid(logits[k]));
    }
  });
  return hm;
}

}  // namespace cyto::roi
