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
#include <memory>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/rng.hpp"
#include "cytocascade/nn/descriptor.hpp"
#include "cytocascade/nn/layers.hpp"
#include "cytocascade/nn/tensor.hpp"

namespace cyto::nn {

enum class Mode { kTrain, kEval };

// Scalar-output network g(x) built from an ArchitectureDescriptor.
template <class T>
class ScorerModel {
 public:
  ScorerModel(ArchitectureDescriptor descriptor, int channels, int height, int width, std::uint64_t seed)
      : descriptor_(std::move(descriptor)), input_{channels, height, width}, seed_(seed) {
    const auto shapes = descriptor_.validate(channels, height, width);
    std::vector<int> cur{channels, height, width};
    for (std::size_t i = 0; i < descriptor_.layers().size(); ++i) {
      const auto& spec = descriptor_.layers()[i];
      Rng rng(hash_values(seed, i));
      switch (spec.kind) {
        case LayerSpec::Kind::kConv:
          layers_.push_back(std::make_unique<Conv2d<T>>(cur[0], spec.size, rng));
          break;
        case LayerSpec::Kind::kPool:
          layers_.push_back(std::make_unique<MaxPool2<T>>());
          break;
        case LayerSpec::Kind::kBatchNorm:
          layers_.push_back(std::make_unique<BatchNorm<T>>(cur[0]));
          break;
        case LayerSpec::Kind::kRelu:
          layers_.push_back(std::make_unique<Relu<T>>());
          break;
        case LayerSpec::Kind::kLinear: {
          int fan_in = 1;
          for (int d : cur) fan_in *= d;
          layers_.push_back(std::make_unique<Linear<T>>(fan_in, spec.size, rng));
          break;
        }
      }
      cur = shapes[i];
    }
  }

  ScorerModel(const ScorerModel&) = delete;
  ScorerModel& operator=(const ScorerModel&) = delete;
  ScorerModel(ScorerModel&&) noexcept = default;
  ScorerModel& operator=(ScorerModel&&) noexcept = default;

  const ArchitectureDescriptor& descriptor() const { return descriptor_; }
  const std::vector<int>& input_shape() const { return input_; }
  std::uint64_t seed() const { return seed_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode m) {
    mode_ = m;
    if (m == Mode::kEval) release();
  }

  // Evaluation-mode logits, one per batch element. Read-only and thread-safe.
  Tensor<T> infer(const Tensor<T>& batch) const {
    check_batch(batch);
    Tensor<T> x = batch;
    for (const auto& l : layers_) {
      x = l->infer(x);
      x.check_finite(l->name().c_str());
    }
    return x;
  }

  // Forward honoring the mode flag; training mode retains activations for backward.
  Tensor<T> forward(const Tensor<T>& batch) {
    if (mode_ == Mode::kEval) return infer(batch);
    check_batch(batch);
    Tensor<T> x = batch;
    for (auto& l : layers_) {
      x = l->forward_train(x);
      x.check_finite(l->name().c_str());
    }
    has_forward_ = true;
    return x;
  }

  // Gradients of sum_i upstream[i] * logit[i] with respect to every
  // parameter (overwriting previous gradients). Returns d/d input.
  Tensor<T> backward(const Tensor<T>& upstream) {
    if (!has_forward_) throw Error("backward called without a training-mode forward pass");
    zero_grad();
    Tensor<T> g = upstream;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.fill(T(0));
  }

  void release() {
    for (auto& l : layers_) l->release();
    has_forward_ = false;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_) {
      for (auto* p : l->params()) out.push_back(p);
    }
    return out;
  }

  std::vector<const Param<T>*> params() const {
    std::vector<const Param<T>*> out;
    for (auto& l : layers_) {
      for (auto* p : l->params()) out.push_back(p);
    }
    return out;
  }

  // Parameters and buffers under stable names "<index>.<layer>.<field>".
  std::vector<std::pair<std::string, Tensor<T>*>> named_state() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string prefix = std::to_string(i) + "." + layers_[i]->name() + ".";
      for (auto* p : layers_[i]->params()) out.emplace_back(prefix + p->name, &p->value);
      for (auto& [name, t] : layers_[i]->buffers()) out.emplace_back(prefix + name, t);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : params()) n += p->value.size();
    return n;
  }

  std::vector<Layer<T>*> layers() {
    std::vector<Layer<T>*> out;
    for (auto& l : layers_) out.push_back(l.get());
    return out;
  }

 private:
  void check_batch(const Tensor<T>& batch) const {
    if (batch.rank() != 4 || batch.dim(1) != input_[0] || batch.dim(2) != input_[1] || batch.dim(3) != input_[2]) {
      throw ShapeError("model expects (n," + std::to_string(input_[0]) + "," + std::to_string(input_[1]) + "," +
                       std::to_string(input_[2]) + "), got " + shape_string(batch.shape()));
    }
  }

  ArchitectureDescriptor descriptor_;
  std::vector<int> input_;
  std::uint64_t seed_;
  Mode mode_ = Mode::kTrain;
  bool has_forward_ = false;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace cyto::nn
