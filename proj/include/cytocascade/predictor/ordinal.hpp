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

#include <array>
#include <cmath>
#include <span>
#include <string>

#include "cytocascade/common/error.hpp"
#include "cytocascade/nn/loss.hpp"

namespace cyto::pred {

inline constexpr int kMinTbs = 2;
inline constexpr int kMaxTbs = 6;
inline constexpr int kNumThresholds = 4;  // tau_2 .. tau_5
inline constexpr double kThresholdGap = 1e-4;

// Cumulative labels S_l = [S > l] for l = 2..5.
using OrdinalLabels = std::array<int, kNumThresholds>;

inline OrdinalLabels encode_tbs(int tbs) {
  if (tbs < kMinTbs || tbs > kMaxTbs) throw ConfigError("TBS category " + std::to_string(tbs) + " outside 2..6");
  OrdinalLabels out{};
  for (int k = 0; k < kNumThresholds; ++k) out[k] = tbs > k + kMinTbs ? 1 : 0;
  return out;
}

inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// Ordered cut points tau_2 < tau_3 < tau_4 < tau_5, parameterized as
// tau_2 = base and tau_l = tau_{l-1} + softplus(d_l) + gap, so any raw
// parameter values give a strictly increasing sequence.
class OrdinalThresholds {
 public:
  OrdinalThresholds() : OrdinalThresholds(std::array<double, kNumThresholds>{-1.5, -0.5, 0.5, 1.5}) {}

  // From realized thresholds; they must be strictly increasing with gaps > gap.
  explicit OrdinalThresholds(const std::array<double, kNumThresholds>& taus) {
    raw_[0] = taus[0];
    for (int k = 1; k < kNumThresholds; ++k) {
      const double step = taus[k] - taus[k - 1] - kThresholdGap;
      if (!(step > 0.0)) throw ConfigError("thresholds must be strictly increasing");
      raw_[k] = inverse_softplus(step);
    }
  }

  static OrdinalThresholds from_raw(const std::array<double, kNumThresholds>& raw) {
    OrdinalThresholds t;
    t.raw_ = raw;
    return t;
  }

  std::array<double, kNumThresholds> taus() const {
    std::array<double, kNumThresholds> t{};
    t[0] = raw_[0];
    for (int k = 1; k < kNumThresholds; ++k) t[k] = t[k - 1] + nn::softplus(raw_[k]) + kThresholdGap;
    return t;
  }

  const std::array<double, kNumThresholds>& raw() const { return raw_; }
  std::span<double> raw_mut() { return raw_; }

  // Converts d loss / d tau_l into d loss / d raw parameters.
  std::array<double, kNumThresholds> chain(const std::array<double, kNumThresholds>& d_tau) const {
    std::array<double, kNumThresholds> d_raw{};
    double tail = 0.0;
    for (int k = kNumThresholds - 1; k >= 0; --k) {
      tail += d_tau[k];
      d_raw[k] = k == 0 ? tail : tail * nn::sigmoid(raw_[k]);
    }
    return d_raw;
  }

 private:
  std::array<double, kNumThresholds> raw_{};
};

// S_hat = 2 + |{l : g > tau_l}|; g equal to a threshold maps to the lower category.
inline int decode_tbs(double g_bar, const std::array<double, kNumThresholds>& taus) {
  if (!std::isfinite(g_bar)) throw NumericError("decode_tbs of non-finite value");
  int s = kMinTbs;
  for (double t : taus) s += g_bar > t ? 1 : 0;
  return s;
}

inline int decode_tbs(double g_bar, const OrdinalThresholds& th) { return decode_tbs(g_bar, th.taus()); }

// sum_l bce(g - tau_l, S_l): the negated cumulative-link log-likelihood.
inline double ordinal_loss(double g, const OrdinalLabels& labels, const std::array<double, kNumThresholds>& taus) {
  double loss = 0.0;
  for (int k = 0; k < kNumThresholds; ++k) loss += nn::bce_with_logits(g - taus[k], labels[k]);
  return loss;
}

struct JointLoss {
  double loss = 0.0;
  double d_logit = 0.0;
  std::array<double, kNumThresholds> d_raw{};
};

// Per-patch objective: bce(g, Y) + ordinal_weight * sum_l bce(g - tau_l, S_l),
// with exact gradients for g and the raw threshold parameters.
inline JointLoss joint_loss(double g, int malignant, const OrdinalLabels& labels, const OrdinalThresholds& th,
                            double ordinal_weight = 1.0) {
  if (!std::isfinite(g)) throw NumericError("joint_loss of non-finite logit");
  CYTO_CHECK(malignant == 0 || malignant == 1, ConfigError, "malignancy label must be 0 or 1");
  const auto taus = th.taus();
  JointLoss out;
  out.loss = nn::bce_with_logits(g, malignant);
  out.d_logit = nn::bce_with_logits_grad(g, malignant);
  std::array<double, kNumThresholds> d_tau{};
  for (int k = 0; k < kNumThresholds; ++k) {
    CYTO_CHECK(labels[k] == 0 || labels[k] == 1, ConfigError, "ordinal labels must be 0 or 1");
    const double z = g - taus[k];
    out.loss += ordinal_weight * nn::bce_with_logits(z, labels[k]);
    const double dz = ordinal_weight * nn::bce_with_logits_grad(z, labels[k]);
    out.d_logit += dz;
    d_tau[k] = -dz;
  }
  out.d_raw = th.chain(d_tau);
  if (!std::isfinite(out.loss)) throw NumericError("joint_loss produced a non-finite value");
  return out;
}

}  // namespace cyto::pred
