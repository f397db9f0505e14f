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

#include <cmath>
#include <set>

#include "cytocascade/common/rng.hpp"
#include "cytocascade/eval/metrics.hpp"

namespace cyto::eval {
namespace {

// Mann-Whitney by pair counting, ties counted half.
double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Precision and recall recounted from scratch at every distinct threshold.
double step_sum_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double P = 0.0;
  for (int l : y) P += l;
  double ap = 0.0, prev = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, sel = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        sel += 1.0;
        tp += y[i];
      }
    }
    ap += (tp / P - prev) * (tp / sel);
    prev = tp / P;
  }
  return ap;
}

struct Sample {
  std::vector<double> scores;
  std::vector<int> labels;
};

Sample random_sample(Rng& rng, std::size_t n, bool ties) {
  Sample out;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng.below(2));
    out.labels.push_back(y);
    const double v = rng.normal() + 0.7 * y;
    out.scores.push_back(ties ? std::round(v * 2.0) / 2.0 : v);
  }
  out.labels[0] = 1;
  out.labels[1] = 0;
  return out;
}

TEST(RocAuc, MatchesPairCountForAllSmallInputs) {
  Rng rng(1);
  for (int t = 0; t < 2000; ++t) {
    const auto n = 2 + static_cast<std::size_t>(rng.below(99));
    const auto s = random_sample(rng, n, t % 2 == 0);
    const auto roc = roc_auc(s.scores, s.labels);
    EXPECT_NEAR(roc.auc, pair_count_auc(s.scores, s.labels), 1e-12);
    EXPECT_GE(roc.auc, 0.0);
    EXPECT_LE(roc.auc, 1.0);
    EXPECT_EQ(roc.fpr.front(), 0.0);
    EXPECT_EQ(roc.fpr.back(), 1.0);
    EXPECT_EQ(roc.tpr.back(), 1.0);
  }
}

TEST(RocAuc, InvariantUnderMonotoneTransforms) {
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    const auto s = random_sample(rng, 2 + rng.below(99), t % 3 == 0);
    const double auc = roc_auc(s.scores, s.labels).auc;
    for (int f = 0; f < 3; ++f) {
      std::vector<double> mapped;
      for (double v : s.scores) {
        mapped.push_back(f == 0 ? std::exp(v) : f == 1 ? 3.0 * v - 7.0 : std::atan(v) + v * v * v);
      }
      EXPECT_DOUBLE_EQ(roc_auc(mapped, s.labels).auc, auc);
    }
  }
}

TEST(RocAuc, WorkedExamplesAndErrors) {
  const std::vector<double> sep{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> sep_y{1, 1, 0, 0};
  EXPECT_EQ(roc_auc(sep, sep_y).auc, 1.0);
  EXPECT_EQ(pr_ap(sep, sep_y).ap, 1.0);
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y{1, 0, 1, 1};
  EXPECT_NEAR(roc_auc(s, y).auc, pair_count_auc(s, y), 1e-15);
  EXPECT_NEAR(roc_auc(s, y).auc, 1.0 / 3.0, 1e-15);
  const std::vector<int> one_class{1, 1, 1, 1};
  EXPECT_THROW(roc_auc(s, one_class), ConfigError);
  const std::vector<double> bad{0.1, std::nan(""), 0.2, 0.3};
  EXPECT_THROW(roc_auc(bad, y), NumericError);
}

// Scores independent of labels: AUC stays within 3 sigma of 0.5 under the
// U-statistic null, sigma^2 = (P + N + 1) / (12 P N).
TEST(RocAuc, NullScoresNearHalf) {
  Rng rng(3);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 4000; ++i) {
    s.push_back(rng.uniform());
    y.push_back(static_cast<int>(rng.below(2)));
  }
  double P = 0;
  for (int l : y) P += l;
  const double N = 4000 - P;
  const double sigma = std::sqrt((P + N + 1) / (12 * P * N));
  EXPECT_NEAR(roc_auc(s, y).auc, 0.5, 3 * sigma);
}

TEST(PrAp, MatchesStepSumForAllSmallInputs) {
  Rng rng(4);
  for (int t = 0; t < 2000; ++t) {
    const auto s = random_sample(rng, 2 + rng.below(99), t % 2 == 0);
    const auto pr = pr_ap(s.scores, s.labels);
    EXPECT_NEAR(pr.ap, step_sum_ap(s.scores, s.labels), 1e-12);
    EXPECT_GE(pr.ap, 0.0);
    EXPECT_LE(pr.ap, 1.0 + 1e-12);
    EXPECT_EQ(pr.recall.back(), 1.0);
  }
}

TEST(Confusion, CountsSumsAndBlockMass) {
  Rng rng(5);
  std::vector<int> a, p;
  for (int i = 0; i < 500; ++i) {
    a.push_back(2 + static_cast<int>(rng.below(5)));
    p.push_back(std::clamp(a.back() + static_cast<int>(rng.below(5)) - 2, 2, 6));
  }
  const auto m = tbs_confusion(a, p);
  EXPECT_EQ(m.total(), 500u);
  std::size_t near = 0;
  for (int s = 2; s <= 6; ++s) {
    EXPECT_EQ(m.row_sum(s), static_cast<std::size_t>(std::count(a.begin(), a.end(), s)));
    EXPECT_EQ(m.column_sum(s), static_cast<std::size_t>(std::count(p.begin(), p.end(), s)));
  }
  for (std::size_t i = 0; i < a.size(); ++i) near += std::abs(a[i] - p[i]) <= 1;
  EXPECT_DOUBLE_EQ(m.block_diagonal_mass(), near / 500.0);
  const auto norm = m.column_normalized();
  for (int c = 0; c < kTbsCount; ++c) {
    double col = 0.0;
    for (int r = 0; r < kTbsCount; ++r) col += norm[r][c];
    EXPECT_NEAR(col, m.column_sum(c + 2) ? 1.0 : 0.0, 1e-12);
  }
  const std::vector<int> bad{7};
  const std::vector<int> ok{2};
  EXPECT_THROW(tbs_confusion(bad, ok), ConfigError);
  EXPECT_EQ(ConfusionMatrix{}.block_diagonal_mass(), 0.0);
}

TEST(Purity, ExtremeCategories) {
  const std::map<std::string, int> truth{{"a", 1}, {"b", 1}, {"c", 0}, {"d", 0}};
  const std::vector<LabeledPrediction> all_right{{"a", 6}, {"b", 6}, {"c", 3}, {"d", 4}};
  const auto s = screening_purity(all_right, truth);
  EXPECT_EQ(s.malignant_at_6.purity, 1.0);
  EXPECT_EQ(s.malignant_at_6.count, 2u);
  EXPECT_FALSE(s.benign_at_2.purity.has_value());
  EXPECT_EQ(s.benign_at_2.count, 0u);
  const std::vector<LabeledPrediction> mixed{{"a", 2}, {"c", 2}, {"d", 2}, {"b", 6}};
  const auto m = screening_purity(mixed, truth);
  EXPECT_NEAR(*m.benign_at_2.purity, 2.0 / 3.0, 1e-15);
  const std::vector<LabeledPrediction> unknown{{"zz", 2}};
  EXPECT_THROW(screening_purity(unknown, truth), ConfigError);
}

}  // namespace
}  // namespace cyto::eval
