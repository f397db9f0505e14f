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

#include "cytocascade/common/rng.hpp"
#include "cytocascade/nn/sgd.hpp"
#include "cytocascade/predictor/ordinal.hpp"

namespace cyto::pred {
namespace {

std::array<double, kNumThresholds> random_taus(Rng& rng) {
  std::array<double, kNumThresholds> t{};
  for (auto& v : t) v = rng.uniform(-5.0, 5.0);
  std::sort(t.begin(), t.end());
  for (int k = 1; k < kNumThresholds; ++k) t[k] = std::max(t[k], t[k - 1] + 0.01);
  return t;
}

TEST(Encode, CumulativeLabelTable) {
  EXPECT_EQ(encode_tbs(2), (OrdinalLabels{0, 0, 0, 0}));
  EXPECT_EQ(encode_tbs(3), (OrdinalLabels{1, 0, 0, 0}));
  EXPECT_EQ(encode_tbs(4), (OrdinalLabels{1, 1, 0, 0}));
  EXPECT_EQ(encode_tbs(5), (OrdinalLabels{1, 1, 1, 0}));
  EXPECT_EQ(encode_tbs(6), (OrdinalLabels{1, 1, 1, 1}));
  EXPECT_THROW(encode_tbs(1), ConfigError);
  EXPECT_THROW(encode_tbs(7), ConfigError);
}

// Interval scan: the category whose half-open interval (tau_{s-1}, tau_s]
// contains g, with tau_1 = -inf and tau_6 = +inf.
int scan_decode(double g, const std::array<double, kNumThresholds>& taus) {
  for (int s = kMinTbs; s < kMaxTbs; ++s) {
    if (g <= taus[s - kMinTbs]) return s;
  }
  return kMaxTbs;
}

TEST(Decode, MatchesIntervalScanAndIsMonotone) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto taus = random_taus(rng);
    const double g = rng.uniform(-7.0, 7.0);
    EXPECT_EQ(decode_tbs(g, taus), scan_decode(g, taus));
    const double g2 = g + rng.uniform(0.0, 3.0);
    EXPECT_LE(decode_tbs(g, taus), decode_tbs(g2, taus));
    // Boundary values go to the lower category.
    const int k = static_cast<int>(rng.below(kNumThresholds));
    EXPECT_EQ(decode_tbs(taus[k], taus), kMinTbs + k);
  }
  EXPECT_THROW(decode_tbs(std::nan(""), std::array<double, 4>{0, 1, 2, 3}), NumericError);
}

// For g inside category s's interval, the ordinal penalty grows with the
// distance between s and the label category.
TEST(OrdinalLoss, PenaltyGrowsWithCategoryDistance) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto taus = random_taus(rng);
    const double g = rng.uniform(-7.0, 7.0);
    const int s_hat = decode_tbs(g, taus);
    for (int s = kMinTbs; s <= kMaxTbs; ++s) {
      const int next = s < s_hat ? s + 1 : s - 1;
      if (s == s_hat) continue;
      EXPECT_GT(ordinal_loss(g, encode_tbs(s), taus), ordinal_loss(g, encode_tbs(next), taus))
          << "g=" << g << " s=" << s << " s_hat=" << s_hat;
    }
  }
}

TEST(JointLoss, WorkedExample) {
  const OrdinalThresholds th(std::array<double, 4>{-2.0, -1.0, 1.0, 2.0});
  const auto taus = th.taus();
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(taus[k], (std::array<double, 4>{-2.0, -1.0, 1.0, 2.0})[k], 1e-12);
  const auto jl = joint_loss(0.0, 1, encode_tbs(6), th);
  using nn::bce_with_logits;
  const double expect = bce_with_logits(0, 1) + bce_with_logits(2, 1) + bce_with_logits(1, 1) +
                        bce_with_logits(-1, 1) + bce_with_logits(-2, 1);
  EXPECT_NEAR(jl.loss, expect, 1e-12);
  EXPECT_NEAR(joint_loss(0.0, 1, encode_tbs(6), th, 0.0).loss, bce_with_logits(0, 1), 1e-15);
  EXPECT_THROW(joint_loss(0.0, 2, encode_tbs(6), th), ConfigError);
  EXPECT_THROW(joint_loss(std::nan(""), 1, encode_tbs(6), th), NumericError);
}

TEST(Thresholds, RawRoundTripAndOrderingForAnyParameters) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    std::array<double, 4> raw{};
    for (auto& v : raw) v = rng.uniform(-40.0, 40.0);
    const auto taus = OrdinalThresholds::from_raw(raw).taus();
    for (int k = 1; k < 4; ++k) EXPECT_GT(taus[k], taus[k - 1]);
  }
  for (int i = 0; i < 200; ++i) {
    const auto taus = random_taus(rng);
    const auto back = OrdinalThresholds(taus).taus();
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(back[k], taus[k], 1e-9);
  }
  EXPECT_THROW(OrdinalThresholds(std::array<double, 4>{0.0, 0.0, 1.0, 2.0}), ConfigError);
}

// Aggressive SGD on the thresholds alone never breaks their order.
TEST(Thresholds, StayOrderedThroughoutTraining) {
  Rng rng(4);
  OrdinalThresholds th;
  nn::SgdConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.momentum = 0.9;
  std::vector<double> velocity(4, 0.0);
  for (int step = 0; step < 1000; ++step) {
    std::array<double, 4> grad{};
    for (int b = 0; b < 16; ++b) {
      const int tbs = 2 + static_cast<int>(rng.below(5));
      const double g = rng.normal() * 4.0;
      const auto jl = joint_loss(g, tbs >= 4, encode_tbs(tbs), th, 3.0);
      for (int k = 0; k < 4; ++k) grad[k] += jl.d_raw[k];
    }
    nn::sgd_update<double>(th.raw_mut(), grad, velocity, cfg);
    const auto taus = th.taus();
    for (int k = 1; k < 4; ++k) ASSERT_GT(taus[k], taus[k - 1]) << "step " << step;
  }
}

}  // namespace
}  // namespace cyto::pred
