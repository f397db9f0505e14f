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
#include <memory>
#include <string>
#include <vector>

#include "cytocascade/common/rng.hpp"
#include "cytocascade/nn/layers.hpp"
#include "cytocascade/nn/loss.hpp"
#include "cytocascade/nn/model.hpp"
#include "cytocascade/predictor/ordinal.hpp"

// Central finite-difference oracles for layer, model and loss gradients.
// Analytic gradients come from the scalar type under test; the numeric side
// always runs in 64-bit on a copy holding the same (representable) values.
namespace cyto::testing {

inline double norm_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, ref = 0.0, ana = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    ref += numeric[i] * numeric[i];
    ana += analytic[i] * analytic[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(ref), std::sqrt(ana), 1e-12});
}

template <class Fn>
double central_difference(double& x, double eps, Fn&& f) {
  const double saved = x;
  x = saved + eps;
  const double hi = f();
  x = saved - eps;
  const double lo = f();
  x = saved;
  return (hi - lo) / (2.0 * eps);
}

struct LayerCase {
  nn::LayerKind kind = nn::LayerKind::kConv;
  std::vector<int> in_shape;
  int out = 0;  // output channels (conv) or features (linear)

  std::string describe() const {
    static const char* names[] = {"conv", "pool", "batchnorm", "relu", "linear"};
    return std::string(names[static_cast<int>(kind)]) + nn::shape_string(in_shape) + "->" + std::to_string(out);
  }
};

inline int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

inline LayerCase random_case(nn::LayerKind kind, Rng& rng) {
  LayerCase c;
  c.kind = kind;
  switch (kind) {
    case nn::LayerKind::kConv:
      c.in_shape = {uniform_int(rng, 1, 3), uniform_int(rng, 1, 4), uniform_int(rng, 1, 7), uniform_int(rng, 1, 7)};
      c.out = uniform_int(rng, 1, 5);
      break;
    case nn::LayerKind::kPool:
      c.in_shape = {uniform_int(rng, 1, 3), uniform_int(rng, 1, 3), uniform_int(rng, 2, 7), uniform_int(rng, 2, 7)};
      break;
    case nn::LayerKind::kRelu:
      c.in_shape = {uniform_int(rng, 1, 3), uniform_int(rng, 1, 3), uniform_int(rng, 1, 5), uniform_int(rng, 1, 5)};
      break;
    case nn::LayerKind::kBatchNorm:
      // At least 3 values per channel: with 2 the normalized output is +-1 and
      // its input gradient is pure rounding noise.
      if (rng.bernoulli(0.5)) {
        c.in_shape = {uniform_int(rng, 2, 4), uniform_int(rng, 1, 3), uniform_int(rng, 2, 4), uniform_int(rng, 1, 4)};
      } else {
        c.in_shape = {uniform_int(rng, 3, 6), uniform_int(rng, 1, 6)};
      }
      break;
    case nn::LayerKind::kLinear:
      if (rng.bernoulli(0.5)) {
        c.in_shape = {uniform_int(rng, 1, 4), uniform_int(rng, 1, 3), uniform_int(rng, 1, 3), uniform_int(rng, 1, 3)};
      } else {
        c.in_shape = {uniform_int(rng, 1, 4), uniform_int(rng, 1, 8)};
      }
      c.out = uniform_int(rng, 1, 6);
      break;
  }
  return c;
}

template <class T>
std::unique_ptr<nn::Layer<T>> make_layer(const LayerCase& c, std::uint64_t seed) {
  Rng rng(seed);
  switch (c.kind) {
    case nn::LayerKind::kConv:
      return std::make_unique<nn::Conv2d<T>>(c.in_shape[1], c.out, rng);
    case nn::LayerKind::kPool:
      return std::make_unique<nn::MaxPool2<T>>();
    case nn::LayerKind::kRelu:
      return std::make_unique<nn::Relu<T>>();
    case nn::LayerKind::kBatchNorm:
      return std::make_unique<nn::BatchNorm<T>>(c.in_shape[1]);
    case nn::LayerKind::kLinear: {
      int fan_in = 1;
      for (std::size_t i = 1; i < c.in_shape.size(); ++i) fan_in *= c.in_shape[i];
      return std::make_unique<nn::Linear<T>>(fan_in, c.out, rng);
    }
  }
  return nullptr;
}

// Value representable in T, away from zero so relu kinks are not straddled.
template <class T>
double sample_value(Rng& rng, double lo, double hi) {
  double v;
  do {
    v = static_cast<double>(static_cast<T>(rng.uniform(lo, hi)));
  } while (std::abs(v) < 0.05);
  return v;
}

template <class T>
nn::Tensor<T> cast_tensor(const nn::TensorD& x) {
  nn::Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(x[i]);
  return out;
}

struct GradCheck {
  double input_rel = 0.0;
  double param_rel = 0.0;
  double worst() const { return std::max(input_rel, param_rel); }
};

// Gradient of sum(r * layer(x)) for input and every parameter, analytic in T
// against 64-bit central differences.
template <class T>
GradCheck check_layer(const LayerCase& c, std::uint64_t seed, double eps = 1e-6) {
  Rng rng(hash_values(seed, 0x9c4ULL));
  auto la = make_layer<T>(c, seed);
  auto ld = make_layer<double>(c, seed);
  auto pa = la->params();
  auto pd = ld->params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t k = 0; k < pa[i]->value.size(); ++k) {
      const double v = sample_value<T>(rng, -1.0, 1.0);
      pa[i]->value[k] = static_cast<T>(v);
      pd[i]->value[k] = v;
    }
  }
  nn::TensorD x(c.in_shape);
  for (auto& v : x.values()) v = sample_value<T>(rng, -2.0, 2.0);
  const auto y = la->forward_train(cast_tensor<T>(x));
  nn::TensorD r(y.shape());
  for (auto& v : r.values()) v = sample_value<T>(rng, -1.0, 1.0);
  const auto dx = la->backward(cast_tensor<T>(r));

  auto objective = [&]() {
    const auto out = ld->forward_train(x);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += r[i] * out[i];
    return s;
  };
  GradCheck res;
  std::vector<double> ana, num;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ana.push_back(static_cast<double>(dx[i]));
    num.push_back(central_difference(x[i], eps, objective));
  }
  res.input_rel = norm_rel_error(ana, num);
  ana.clear();
  num.clear();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    for (std::size_t k = 0; k < pd[i]->value.size(); ++k) {
      ana.push_back(static_cast<double>(pa[i]->grad[k]));
      num.push_back(central_difference(pd[i]->value[k], eps, objective));
    }
  }
  if (!ana.empty()) res.param_rel = norm_rel_error(ana, num);
  return res;
}

// Whole-model check on sampled parameter and input entries. The 64-bit copy
// receives the T model's state, so both evaluate the same function.
template <class T>
GradCheck check_model(const nn::ArchitectureDescriptor& desc, int c, int h, int w, int batch, std::uint64_t seed,
                      std::size_t samples_per_tensor, std::size_t input_samples, double eps = 1e-6) {
  Rng rng(hash_values(seed, 0x40deULL));
  nn::ScorerModel<T> ma(desc, c, h, w, seed);
  nn::ScorerModel<double> md(desc, c, h, w, seed);
  auto sa = ma.named_state();
  auto sd = md.named_state();
  for (std::size_t i = 0; i < sa.size(); ++i) {
    for (std::size_t k = 0; k < sa[i].second->size(); ++k) (*sd[i].second)[k] = static_cast<double>((*sa[i].second)[k]);
  }
  nn::TensorD x({batch, c, h, w});
  for (auto& v : x.values()) v = sample_value<T>(rng, -2.0, 2.0);
  nn::TensorD r({batch, 1});
  for (auto& v : r.values()) v = sample_value<T>(rng, -1.0, 1.0);
  ma.set_mode(nn::Mode::kTrain);
  md.set_mode(nn::Mode::kTrain);
  ma.forward(cast_tensor<T>(x));
  const auto dx = ma.backward(cast_tensor<T>(r));

  auto objective = [&]() {
    const auto out = md.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += r[i] * out[i];
    return s;
  };
  GradCheck res;
  std::vector<double> ana, num;
  for (std::size_t s = 0; s < input_samples; ++s) {
    const auto i = static_cast<std::size_t>(rng.below(x.size()));
    ana.push_back(static_cast<double>(dx[i]));
    num.push_back(central_difference(x[i], eps, objective));
  }
  res.input_rel = norm_rel_error(ana, num);
  ana.clear();
  num.clear();
  auto pa = ma.params();
  auto pd = md.params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t s = 0; s < samples_per_tensor; ++s) {
      const auto k = static_cast<std::size_t>(rng.below(pa[i]->value.size()));
      ana.push_back(static_cast<double>(pa[i]->grad[k]));
      num.push_back(central_difference(pd[i]->value[k], eps, objective));
    }
  }
  res.param_rel = norm_rel_error(ana, num);
  return res;
}

// d bce_with_logits / dz at a random (z, target).
inline double check_bce(Rng& rng) {
  double z = rng.uniform(-6.0, 6.0);
  const double t = rng.bernoulli(0.3) ? rng.uniform() : static_cast<double>(rng.below(2));
  const double num = central_difference(z, 1e-5, [&] { return nn::bce_with_logits(z, t); });
  return norm_rel_error({nn::bce_with_logits_grad(z, t)}, {num});
}

// Gradient of joint_loss in the logit and all four raw threshold parameters.
inline double check_joint_loss(Rng& rng) {
  double g = rng.uniform(-4.0, 4.0);
  std::array<double, pred::kNumThresholds> raw{};
  raw[0] = rng.uniform(-3.0, 0.0);
  for (int k = 1; k < pred::kNumThresholds; ++k) raw[k] = rng.uniform(-2.0, 2.0);
  const int y = static_cast<int>(rng.below(2));
  const auto labels = pred::encode_tbs(2 + static_cast<int>(rng.below(5)));
  const double weight = rng.uniform(0.2, 2.0);
  auto f = [&] { return pred::joint_loss(g, y, labels, pred::OrdinalThresholds::from_raw(raw), weight).loss; };
  const auto jl = pred::joint_loss(g, y, labels, pred::OrdinalThresholds::from_raw(raw), weight);
  std::vector<double> ana{jl.d_logit}, num{central_difference(g, 1e-5, f)};
  for (int k = 0; k < pred::kNumThresholds; ++k) {
    ana.push_back(jl.d_raw[k]);
    num.push_back(central_difference(raw[k], 1e-5, f));
  }
  return norm_rel_error(ana, num);
}

}  // namespace cyto::testing
