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
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"

namespace cyto::eval {

struct RocCurve {
  std::vector<double> fpr;  // starts at 0, ends at 1
  std::vector<double> tpr;
  std::vector<double> thresholds;  // score at each point after the origin
  double auc = 0.0;
};

struct PrCurve {
  std::vector<double> recall;
  std::vector<double> precision;
  std::vector<double> thresholds;
  double ap = 0.0;
};

namespace detail {

// Groups of equal scores in descending order, with (positives, negatives) per group.
struct ScoreGroup {
  double score;
  std::size_t pos;
  std::size_t neg;
};

inline std::vector<ScoreGroup> group_scores(std::span<const double> scores, std::span<const int> labels) {
  CYTO_CHECK(scores.size() == labels.size(), ShapeError, "scores and labels differ in length");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (double s : scores) CYTO_CHECK(std::isfinite(s), NumericError, "non-finite score");
  for (int l : labels) CYTO_CHECK(l == 0 || l == 1, ConfigError, "labels must be 0 or 1");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<ScoreGroup> groups;
  for (auto i : idx) {
    if (groups.empty() || groups.back().score != scores[i]) groups.push_back({scores[i], 0, 0});
    (labels[i] ? groups.back().pos : groups.back().neg)++;
  }
  return groups;
}

}  // namespace detail

// ROC by threshold sweep; tied scores form one diagonal segment, so the
// trapezoidal area equals the Mann-Whitney statistic with ties counted half.
inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = detail::group_scores(scores, labels);
  std::size_t P = 0, N = 0;
  for (const auto& g : groups) {
    P += g.pos;
    N += g.neg;
  }
  if (P == 0 || N == 0) throw ConfigError("ROC needs at least one positive and one negative label");
  RocCurve c;
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (const auto& g : groups) {
    const std::size_t tp2 = tp + g.pos, fp2 = fp + g.neg;
    area += static_cast<double>(fp2 - fp) * (static_cast<double>(tp) + static_cast<double>(tp2)) / 2.0;
    tp = tp2;
    fp = fp2;
    c.fpr.push_back(static_cast<double>(fp) / N);
    c.tpr.push_back(static_cast<double>(tp) / P);
    c.thresholds.push_back(g.score);
  }
  c.auc = area / (static_cast<double>(P) * static_cast<double>(N));
  return c;
}

// Average precision as the step sum over distinct thresholds:
// AP = sum_k (R_k - R_{k-1}) P_k.
inline PrCurve pr_ap(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = detail::group_scores(scores, labels);
  std::size_t P = 0;
  for (const auto& g : groups) P += g.pos;
  if (P == 0) throw ConfigError("PR needs at least one positive label");
  PrCurve c;
  std::size_t tp = 0, seen = 0;
  double prev_recall = 0.0;
  for (const auto& g : groups) {
    tp += g.pos;
    seen += g.pos + g.neg;
    const double recall = static_cast<double>(tp) / P;
    const double precision = static_cast<double>(tp) / seen;
    c.ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    c.recall.push_back(recall);
    c.precision.push_back(precision);
    c.thresholds.push_back(g.score);
  }
  return c;
}

inline constexpr int kTbsLow = 2;
inline constexpr int kTbsHigh = 6;
inline constexpr int kTbsCount = kTbsHigh - kTbsLow + 1;

// counts[assigned - 2][predicted - 2].
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kTbsCount>, kTbsCount> counts{};

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts) {
      for (auto v : row) n += v;
    }
    return n;
  }

  std::size_t row_sum(int assigned) const {
    std::size_t n = 0;
    for (auto v : counts[assigned - kTbsLow]) n += v;
    return n;
  }

  std::size_t column_sum(int predicted) const {
    std::size_t n = 0;
    for (const auto& row : counts) n += row[predicted - kTbsLow];
    return n;
  }

  // Each nonempty predicted-category column scaled to sum to 1; empty columns stay 0.
  std::array<std::array<double, kTbsCount>, kTbsCount> column_normalized() const {
    std::array<std::array<double, kTbsCount>, kTbsCount> out{};
    for (int p = 0; p < kTbsCount; ++p) {
      const auto col = column_sum(p + kTbsLow);
      if (col == 0) continue;
      for (int a = 0; a < kTbsCount; ++a) out[a][p] = static_cast<double>(counts[a][p]) / col;
    }
    return out;
  }

  // Fraction of slides with |assigned - predicted| <= 1.
  double block_diagonal_mass() const {
    const auto n = total();
    if (n == 0) return 0.0;
    std::size_t near = 0;
    for (int a = 0; a < kTbsCount; ++a) {
      for (int p = 0; p < kTbsCount; ++p) {
        if (std::abs(a - p) <= 1) near += counts[a][p];
      }
    }
    return static_cast<double>(near) / n;
  }
};

inline ConfusionMatrix tbs_confusion(std::span<const int> assigned, std::span<const int> predicted) {
  CYTO_CHECK(assigned.size() == predicted.size(), ShapeError, "assigned and predicted lists differ in length");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    const int a = assigned[i], p = predicted[i];
    if (a < kTbsLow || a > kTbsHigh || p < kTbsLow || p > kTbsHigh) {
      throw ConfigError("TBS category outside 2..6 at position " + std::to_string(i));
    }
    ++m.counts[a - kTbsLow][p - kTbsLow];
  }
  return m;
}

struct PurityEntry {
  std::size_t count = 0;    // slides predicted in this category
  std::size_t correct = 0;  // of those, slides with the matching malignancy label
  std::optional<double> purity;  // absent when count == 0
};

// Screening purity: P(Y=0 | S_hat=2) and P(Y=1 | S_hat=6).
struct PuritySummary {
  PurityEntry benign_at_2;
  PurityEntry malignant_at_6;
};

struct LabeledPrediction {
  std::string slide_id;
  int tbs_hat = 2;
};

// Joins predictions to ground-truth malignancy by slide id.
inline PuritySummary screening_purity(std::span<const LabeledPrediction> predictions,
                                      const std::map<std::string, int>& malignancy_by_slide) {
  PuritySummary s;
  for (const auto& p : predictions) {
    const auto it = malignancy_by_slide.find(p.slide_id);
    if (it == malignancy_by_slide.end()) throw ConfigError("no ground truth for slide '" + p.slide_id + "'");
    if (p.tbs_hat == kTbsLow) {
      ++s.benign_at_2.count;
      s.benign_at_2.correct += it->second == 0 ? 1 : 0;
    } else if (p.tbs_hat == kTbsHigh) {
      ++s.malignant_at_6.count;
      s.malignant_at_6.correct += it->second == 1 ? 1 : 0;
    }
  }
  for (auto* e : {&s.benign_at_2, &s.malignant_at_6}) {
    if (e->count) e->purity = static_cast<double>(e->correct) / static_cast<double>(e->count);
  }
  return s;
}

}  // namespace cyto::eval
