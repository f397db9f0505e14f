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
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/rng.hpp"
#include "cytocascade/nn/model.hpp"
#include "cytocascade/nn/sgd.hpp"

namespace cyto::nn {

struct TrainLog {
  std::vector<double> step_loss;   // mean loss of every minibatch
  std::vector<double> epoch_loss;  // sample-weighted mean over each epoch
};

// Minibatch SGD over n samples, shuffled per epoch from cfg.rng_seed.
//   make_batch(indices) -> input tensor
//   loss_grad(logits, indices, upstream) -> mean loss; fills upstream with
//     d(mean loss)/d(logit) and may accumulate side-parameter gradients
//   side_step() is called after every network update (for parameters that
//     live outside the model, e.g. ordinal thresholds)
// A trailing batch of one sample is folded into the previous batch so
// batchnorm always sees at least two samples.
template <class MakeBatch, class LossGrad, class SideStep>
TrainLog run_sgd(ScorerModel<float>& model, Sgd<float>& opt, std::size_t n, const SgdConfig& cfg,
                 MakeBatch&& make_batch, LossGrad&& loss_grad, SideStep&& side_step,
                 const std::function<void(int epoch, double loss)>& on_epoch = {}) {
  cfg.validate(true);
  CYTO_CHECK(n >= 2, ConfigError, "training needs at least two samples");
  model.set_mode(Mode::kTrain);
  std::vector<std::size_t> order(n);
  TrainLog log;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(hash_values(cfg.rng_seed, 0xe90cULL, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < n;) {
      std::size_t e = std::min(n, b + std::max<std::size_t>(bs, 2));
      if (n - e == 1) e = n;
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      const TensorF x = make_batch(idx);
      const TensorF logits = model.forward(x);
      TensorF upstream(logits.shape());
      const double loss = loss_grad(logits, idx, upstream);
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(log.step_loss.size()));
      }
      model.backward(upstream);
      opt.step(model.params());
      side_step();
      log.step_loss.push_back(loss);
      epoch_sum += loss * static_cast<double>(e - b);
      b = e;
    }
    log.epoch_loss.push_back(epoch_sum / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch, log.epoch_loss.back());
  }
  model.set_mode(Mode::kEval);
  return log;
}

}  // namespace cyto::nn
