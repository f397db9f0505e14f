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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cytocascade/cli/pipeline.hpp"
#include "cytocascade/eval/metrics.hpp"
#include "test_support.hpp"

namespace cyto::roi {
namespace {

using testing::TempDir;

// Detector trained at a moderate scale on class_signal 1 slides, then probed
// on held-out slides.
class DetectorQuality : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("detq");
    cfg_ = new cli::RunConfig();
    cfg_->out = dir_->path() / "data";
    cfg_->rng_seed = 77;
    cfg_->slides = 40;
    cfg_->test_slides = 10;
    cfg_->class_signal = 1.0;
    data_ = new cli::SynthOutput(cli::run_synth(*cfg_));
    train_set_ = new RoiTrainSet(build_trainset(data_->train, cfg_->roi_config()));
    detector_ = new Model(train_roi(*train_set_, nn::desk_descriptor(), cfg_->sgd(cfg_->roi_epochs)));
    test_set_ = new RoiTrainSet(build_trainset(data_->test, cfg_->roi_config()));
  }
  static void TearDownTestSuite() {
    delete test_set_;
    delete detector_;
    delete train_set_;
    delete data_;
    delete cfg_;
    delete dir_;
  }

  // AUC on unflagged held-out patches.
  static double held_out_auc(const Model& m) {
    std::vector<const Image*> imgs;
    std::vector<int> labels;
    for (std::size_t i = 0; i < test_set_->samples.size(); ++i) {
      if (test_set_->samples[i].flagged) continue;
      imgs.push_back(&test_set_->pixels[i]);
      labels.push_back(test_set_->samples[i].label);
    }
    const auto s = score_images(m, imgs, 1);
    return eval::roc_auc(std::vector<double>(s.begin(), s.end()), labels).auc;
  }

  static TempDir* dir_;
  static cli::RunConfig* cfg_;
  static cli::SynthOutput* data_;
  static RoiTrainSet* train_set_;
  static Model* detector_;
  static RoiTrainSet* test_set_;
};

TempDir* DetectorQuality::dir_ = nullptr;
cli::RunConfig* DetectorQuality::cfg_ = nullptr;
cli::SynthOutput* DetectorQuality::data_ = nullptr;
RoiTrainSet* DetectorQuality::train_set_ = nullptr;
Model* DetectorQuality::detector_ = nullptr;
RoiTrainSet* DetectorQuality::test_set_ = nullptr;

TEST_F(DetectorQuality, HeldOutPatchAuc) { EXPECT_GE(held_out_auc(*detector_), 0.95); }

TEST_F(DetectorQuality, ShuffledLabelsGiveChanceAuc) {
  auto set = *train_set_;
  shuffle_labels(set, 5);
  const auto null_model = train_roi(set, nn::desk_descriptor(), cfg_->sgd(cfg_->roi_epochs));
  const double auc = held_out_auc(null_model);
  EXPECT_GE(auc, 0.4);
  EXPECT_LE(auc, 0.6);
}

// Every cell in the top 1% of a held-out heatmap lies on a planted group.
TEST_F(DetectorQuality, TopCellsLocalizePlantedGroups) {
  for (const auto& e : data_->test.entries()) {
    const auto c = SlideContainer::open(e.container);
    const auto grid = cli::grid_for(c, *cfg_);
    const auto hm = score_slide(*detector_, c, grid);
    const auto anns = load_annotations(e.annotations);
    const auto top = select_top(hm, std::max<std::size_t>(1, hm.scores.size() / 100));
    for (const auto& r : top.regions) {
      const Region box{r.origin.x, r.origin.y, cfg_->patch_w, cfg_->patch_h};
      EXPECT_GT(annotation_occupancy(box, anns), 0.0) << e.slide_id << " cell " << r.index;
    }
  }
}

TEST_F(DetectorQuality, EmptySlideStaysBelowPositiveMedian) {
  std::vector<const Image*> pos;
  for (std::size_t i = 0; i < test_set_->samples.size(); ++i) {
    if (test_set_->samples[i].label == 1) pos.push_back(&test_set_->pixels[i]);
  }
  auto pos_scores = score_images(*detector_, pos, 1);
  std::nth_element(pos_scores.begin(), pos_scores.begin() + pos_scores.size() / 2, pos_scores.end());
  const float median = pos_scores[pos_scores.size() / 2];
  for (int i = 0; i < 3; ++i) {
    auto spec = cfg_->synth_spec();
    spec.n_groups = 0;
    spec.rng_seed = hash_values(77, 0xe0ULL, i);
    spec.slide_id = "empty_" + std::to_string(i);
    const auto g = synth::generate_slide(spec, dir_->path() / spec.slide_id);
    const auto hm = score_slide(*detector_, *g.container, cli::grid_for(*g.container, *cfg_));
    EXPECT_LT(*std::max_element(hm.scores.begin(), hm.scores.end()), median) << spec.slide_id;
  }
}

// Negatives are drawn uniformly from grid cells, so the flagged fraction
// should match the fraction of cells that overlap the annotations.
TEST_F(DetectorQuality, FlaggedNegativeRateMatchesAnnotatedArea) {
  double expected = 0.0, variance = 0.0;
  std::size_t negatives = 0;
  for (const auto& e : data_->train.entries()) {
    const auto c = SlideContainer::open(e.container);
    const auto grid = cli::grid_for(c, *cfg_);
    const auto anns = load_annotations(e.annotations);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < grid.count(); ++i) {
      const auto o = grid.origin(i);
      hit += annotation_occupancy({o.x, o.y, cfg_->patch_w, cfg_->patch_h}, anns) >= cfg_->occupancy_threshold;
    }
    const double p = static_cast<double>(hit) / static_cast<double>(grid.count());
    const auto n = static_cast<double>(std::count_if(train_set_->samples.begin(), train_set_->samples.end(),
                                                     [&](const RoiSample& s) {
                                                       return s.slide_id == e.slide_id && s.label == 0;
                                                     }));
    expected += n * p;
    variance += n * p * (1.0 - p);
    negatives += static_cast<std::size_t>(n);
  }
  ASSERT_EQ(negatives, train_set_->negatives);
  EXPECT_NEAR(static_cast<double>(train_set_->flagged_negatives), expected, 4.0 * std::sqrt(variance) + 1.0);
}

}  // namespace
}  // namespace cyto::roi
