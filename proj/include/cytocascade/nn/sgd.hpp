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
#include <span>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/nn/layers.hpp"
#include "cytocascade/nn/tensor.hpp"

namespace cyto::nn {

struct SgdConfig {
  double learning_rate = 0.001;
  double momentum = 0.99;
  double weight_decay = 1e-7;
  int batch_size = 32;
  int epochs = 4;
  std::uint64_t rng_seed = 1;

  // `allow_frozen` admits learning_rate == 0, which trainers accept as a
  // no-update run; user-facing configuration rejects it.
  void validate(bool allow_frozen = false) const {
    CYTO_CHECK(learning_rate > 0.0 || (allow_frozen && learning_rate == 0.0), ConfigError,
               "learning_rate must be > 0");
    CYTO_CHECK(momentum >= 0.0 && momentum < 1.0, ConfigError, "momentum must be in [0,1)");
    CYTO_CHECK(weight_decay >= 0.0, ConfigError, "weight_decay must be >= 0");
    CYTO_CHECK(batch_size >= 1, ConfigError, "batch_size must be >= 1");
    CYTO_CHECK(epochs >= 0, ConfigError, "epochs must be >= 0");
  }
};

// v <- momentum * v + (grad + weight_decay * theta); theta <- theta - lr * v.
template <class T>
void sgd_update(std::span<T> theta, std::span<const T> grad, std::span<T> velocity, const SgdConfig& cfg) {
  CYTO_CHECK(theta.size() == grad.size() && theta.size() == velocity.size(), ShapeError,
             "sgd: parameter, gradient and velocity sizes differ");
  const T mu = static_cast<T>(cfg.momentum);
  const T wd = static_cast<T>(cfg.weight_decay);
  const T lr = static_cast<T>(cfg.learning_rate);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    velocity[i] = mu * velocity[i] + (grad[i] + wd * theta[i]);
    theta[i] -= lr * velocity[i];
  }
}

// Momentum state for a fixed list of parameters.
template <class T>
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(true); }

  const SgdConfig& config() const { return cfg_; }

  void step(const std::vector<Param<T>*>& params) {
    if (velocity_.empty()) {
      for (const auto* p : params) velocity_.emplace_back(p->value.shape());
    }
    CYTO_CHECK(velocity_.size() == params.size(), ShapeError, "sgd: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto* p = params[i];
      CYTO_CHECK(velocity_[i].size() == p->value.size(), ShapeError, "sgd: parameter shape changed");
      sgd_update<T>(p->value.values(), p->grad.values(), velocity_[i].values(), cfg_);
    }
  }

  std::vector<Tensor<T>>& velocity() { return velocity_; }
  const std::vector<Tensor<T>>& velocity() const { return velocity_; }

 private:
  SgdConfig cfg_;
  std::vector<Tensor<T>> velocity_;
};

}  // namespace cyto::nn
