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

#include <cmath>
#include <span>

#include "cytocascade/common/error.hpp"

namespace cyto::nn {

inline double sigmoid(double z) {
  if (!std::isfinite(z)) throw NumericError("sigmoid of non-finite value");
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow or cancellation.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// -[t log sigma(z) + (1-t) log(1 - sigma(z))], evaluated as
// t softplus(-z) + (1-t) softplus(z).
inline double bce_with_logits(double z, double target) {
  if (!std::isfinite(z) || !std::isfinite(target)) throw NumericError("bce of non-finite value");
  return target * softplus(-z) + (1.0 - target) * softplus(z);
}

// d bce / d z.
inline double bce_with_logits_grad(double z, double target) { return sigmoid(z) - target; }

// Probability form, for callers that only hold sigma(z). Probabilities are
// clamped away from 0 and 1.
inline double bce(double prob, double target) {
  if (!std::isfinite(prob) || !std::isfinite(target)) throw NumericError("bce of non-finite value");
  CYTO_CHECK(target == 0.0 || target == 1.0, ConfigError, "bce target must be 0 or 1");
  constexpr double kTiny = 1e-300;
  const double p = std::fmin(std::fmax(prob, kTiny), 1.0);
  const double q = std::fmin(std::fmax(1.0 - prob, kTiny), 1.0);
  return -(target * std::log(p) + (1.0 - target) * std::log(q));
}

}  // namespace cyto::nn
