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

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cytocascade/common/error.hpp"
#include "cytocascade/common/rng.hpp"
#include "cytocascade/nn/tensor.hpp"

namespace cyto::nn {

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Sequential sum. Eigen's vectorized reductions peel by pointer alignment, so
// their rounding would depend on where the buffer happens to live.
template <class T>
T ordered_sum(const T* p, std::size_t n, std::size_t stride = 1) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += p[i * stride];
  return acc;
}

enum class LayerKind { kConv, kPool, kBatchNorm, kRelu, kLinear };

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual std::string name() const = 0;
  // Evaluation-mode forward; touches no layer state, safe to share across threads.
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  // Training-mode forward; retains what backward needs.
  virtual Tensor<T> forward_train(const Tensor<T>& x) = 0;
  // Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  // Non-trainable state saved with the model (batchnorm running statistics).
  virtual std::vector<std::pair<std::string, Tensor<T>*>> buffers() { return {}; }
  virtual void release() = 0;

 protected:
  static void require(bool cached, const std::string& who) {
    if (!cached) throw Error(who + ": backward called without a training forward pass");
  }
};

// Fan-in uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
void init_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

// 3x3 convolution, padding 1, stride 1.
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, Rng& rng) : in_(in_ch), out_(out_ch) {
    weight_ = {"weight", Tensor<T>({out_ch, in_ch, 3, 3}), Tensor<T>({out_ch, in_ch, 3, 3})};
    bias_ = {"bias", Tensor<T>({out_ch}), Tensor<T>({out_ch})};
    init_uniform(weight_.value, in_ch * 9, rng);
    init_uniform(bias_.value, in_ch * 9, rng);
  }

  LayerKind kind() const override { return LayerKind::kConv; }
  std::string name() const override { return "conv" + std::to_string(out_); }

  Tensor<T> infer(const Tensor<T>& x) const override {
    check_input(x);
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, out_, h, w});
    RowMat<T> cols(in_ * 9, h * w);
    for (int s = 0; s < n; ++s) {
      im2col(x, s, cols);
      apply(cols, y, s);
    }
    return y;
  }

  Tensor<T> forward_train(const Tensor<T>& x) override {
    check_input(x);
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape();
    cols_.assign(static_cast<std::size_t>(n), RowMat<T>(in_ * 9, h * w));
    Tensor<T> y({n, out_, h, w});
    for (int s = 0; s < n; ++s) {
      im2col(x, s, cols_[s]);
      apply(cols_[s], y, s);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require(!cols_.empty(), name());
    const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
    CYTO_CHECK(dy.shape() == (std::vector<int>{n, out_, h, w}), ShapeError, name() + ": upstream shape mismatch");
    MatMap<T> dw(weight_.grad.data(), out_, in_ * 9);
    ConstMatMap<T> wmat(weight_.value.data(), out_, in_ * 9);
    Tensor<T> dx(in_shape_);
    RowMat<T> dcols(in_ * 9, h * w);
    for (int s = 0; s < n; ++s) {
      ConstMatMap<T> g(dy.data() + static_cast<std::size_t>(s) * out_ * h * w, out_, h * w);
      dw.noalias() += g * cols_[s].transpose();
      for (int f = 0; f < out_; ++f) bias_.grad[f] += ordered_sum(g.data() + static_cast<std::size_t>(f) * h * w, h * w);
      dcols.noalias() = wmat.transpose() * g;
      col2im(dcols, dx, s);
    }
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  void release() override { cols_.clear(); }

 private:
  void check_input(const Tensor<T>& x) const {
    CYTO_CHECK(x.rank() == 4 && x.dim(1) == in_, ShapeError,
               name() + ": expected (n," + std::to_string(in_) + ",h,w), got " + shape_string(x.shape()));
  }

  void im2col(const Tensor<T>& x, int s, RowMat<T>& cols) const {
    const int h = x.dim(2), w = x.dim(3);
    for (int c = 0; c < in_; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T* dst = cols.data() + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * h * w;
          for (int yy = 0; yy < h; ++yy) {
            const int sy = yy + ky - 1;
            T* row = dst + static_cast<std::size_t>(yy) * w;
            if (sy < 0 || sy >= h) {
              std::fill(row, row + w, T(0));
              continue;
            }
            const T* src = &x.at(s, c, sy, 0);
            for (int xx = 0; xx < w; ++xx) {
              const int sx = xx + kx - 1;
              row[xx] = (sx < 0 || sx >= w) ? T(0) : src[sx];
            }
          }
        }
      }
    }
  }

  void col2im(const RowMat<T>& dcols, Tensor<T>& dx, int s) const {
    const int h = dx.dim(2), w = dx.dim(3);
    for (int c = 0; c < in_; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = dcols.data() + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * h * w;
          for (int yy = 0; yy < h; ++yy) {
            const int sy = yy + ky - 1;
            if (sy < 0 || sy >= h) continue;
            T* drow = &dx.at(s, c, sy, 0);
            const T* srow = src + static_cast<std::size_t>(yy) * w;
            for (int xx = 0; xx < w; ++xx) {
              const int sx = xx + kx - 1;
              if (sx >= 0 && sx < w) drow[sx] += srow[xx];
            }
          }
        }
      }
    }
  }

  void apply(const RowMat<T>& cols, Tensor<T>& y, int s) const {
    const int hw = y.dim(2) * y.dim(3);
    ConstMatMap<T> wmat(weight_.value.data(), out_, in_ * 9);
    MatMap<T> out(y.data() + static_cast<std::size_t>(s) * out_ * hw, out_, hw);
    out.noalias() = wmat * cols;
    for (int f = 0; f < out_; ++f) out.row(f).array() += bias_.value[f];
  }

  int in_, out_;
  Param<T> weight_, bias_;
  std::vector<int> in_shape_;
  std::vector<RowMat<T>> cols_;
};

// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
template <class T>
class MaxPool2 final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kPool; }
  std::string name() const override { return "pool"; }

  Tensor<T> infer(const Tensor<T>& x) const override {
    return pool(x, nullptr);
  }
  Tensor<T> forward_train(const Tensor<T>& x) override {
    in_shape_ = x.shape();
    cached_ = true;
    return pool(x, &argmax_);
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require(cached_, name());
    CYTO_CHECK(dy.size() == argmax_.size(), ShapeError, "pool: upstream shape mismatch");
    Tensor<T> dx(in_shape_);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
  }
  void release() override {
    argmax_.clear();
    cached_ = false;
  }

 private:
  Tensor<T> pool(const Tensor<T>& x, std::vector<std::size_t>* argmax) const {
    CYTO_CHECK(x.rank() == 4, ShapeError, "pool: expected rank-4 input");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = h / 2, ow = w / 2;
    CYTO_CHECK(oh > 0 && ow > 0, ShapeError, "pool: spatial size too small");
    Tensor<T> y({n, c, oh, ow});
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t o = 0;
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * h * w;
        for (int yy = 0; yy < oh; ++yy) {
          for (int xx = 0; xx < ow; ++xx, ++o) {
            std::size_t best = base + static_cast<std::size_t>(2 * yy) * w + 2 * xx;
            const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
            for (auto k : cand) {
              if (x[k] > x[best]) best = k;
            }
            y[o] = x[best];
            if (argmax) (*argmax)[o] = best;
          }
        }
      }
    }
    return y;
  }

  std::vector<int> in_shape_;
  std::vector<std::size_t> argmax_;
  bool cached_ = false;
};

template <class T>
class Relu final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  std::string name() const override { return "relu"; }
  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T(0) ? v : T(0);
    return y;
  }
  Tensor<T> forward_train(const Tensor<T>& x) override {
    mask_.assign(x.size(), 0);
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] > T(0)) {
        mask_[i] = 1;
      } else {
        y[i] = T(0);
      }
    }
    cached_ = true;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require(cached_, name());
    CYTO_CHECK(dy.size() == mask_.size(), ShapeError, "relu: upstream shape mismatch");
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!mask_[i]) dx[i] = T(0);
    }
    return dx;
  }
  void release() override {
    mask_.clear();
    cached_ = false;
  }

 private:
  std::vector<std::uint8_t> mask_;
  bool cached_ = false;
};

// Batch normalization over channels (rank 4: reduce over n,h,w) or features
// (rank 2: reduce over n). Statistics are accumulated in double.
template <class T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNorm(int channels) : ch_(channels) {
    gamma_ = {"gamma", Tensor<T>({channels}, T(1)), Tensor<T>({channels})};
    beta_ = {"beta", Tensor<T>({channels}), Tensor<T>({channels})};
    running_mean_ = Tensor<T>({channels});
    running_var_ = Tensor<T>({channels}, T(1));
  }

  LayerKind kind() const override { return LayerKind::kBatchNorm; }
  std::string name() const override { return "bn" + std::to_string(ch_); }

  Tensor<T> infer(const Tensor<T>& x) const override {
    const auto [n, inner] = layout(x);
    Tensor<T> y(x.shape());
    for (int c = 0; c < ch_; ++c) {
      const double scale = gamma_.value[c] / std::sqrt(static_cast<double>(running_var_[c]) + kEps);
      const double shift = beta_.value[c] - scale * running_mean_[c];
      for_channel(n, inner, c, [&](std::size_t i) { y[i] = static_cast<T>(scale * x[i] + shift); });
    }
    return y;
  }

  Tensor<T> forward_train(const Tensor<T>& x) override {
    const auto [n, inner] = layout(x);
    const double count = static_cast<double>(n) * inner;
    in_shape_ = x.shape();
    xhat_ = Tensor<T>(x.shape());
    inv_std_.assign(static_cast<std::size_t>(ch_), 0.0);
    Tensor<T> y(x.shape());
    for (int c = 0; c < ch_; ++c) {
      double sum = 0.0;
      for_channel(n, inner, c, [&](std::size_t i) { sum += x[i]; });
      const double mean = sum / count;
      double sq = 0.0;
      for_channel(n, inner, c, [&](std::size_t i) {
        const double d = x[i] - mean;
        sq += d * d;
      });
      const double var = sq / count;
      const double inv = 1.0 / std::sqrt(var + kEps);
      inv_std_[c] = inv;
      for_channel(n, inner, c, [&](std::size_t i) {
        const double xh = (x[i] - mean) * inv;
        xhat_[i] = static_cast<T>(xh);
        y[i] = static_cast<T>(gamma_.value[c] * xh + beta_.value[c]);
      });
      const double unbiased = count > 1 ? sq / (count - 1) : var;
      running_mean_[c] = static_cast<T>((1 - kMomentum) * running_mean_[c] + kMomentum * mean);
      running_var_[c] = static_cast<T>((1 - kMomentum) * running_var_[c] + kMomentum * unbiased);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require(!inv_std_.empty(), name());
    CYTO_CHECK(dy.shape() == in_shape_, ShapeError, name() + ": upstream shape mismatch");
    const auto [n, inner] = layout(dy);
    const double count = static_cast<double>(n) * inner;
    Tensor<T> dx(in_shape_);
    for (int c = 0; c < ch_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for_channel(n, inner, c, [&](std::size_t i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xhat_[i];
      });
      gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const double k = gamma_.value[c] * inv_std_[c] / count;
      for_channel(n, inner, c, [&](std::size_t i) {
        dx[i] = static_cast<T>(k * (count * dy[i] - sum_dy - xhat_[i] * sum_dy_xhat));
      });
    }
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }
  void release() override {
    inv_std_.clear();
    xhat_ = Tensor<T>();
  }

 private:
  std::pair<int, int> layout(const Tensor<T>& x) const {
    if (x.rank() == 4 && x.dim(1) == ch_) return {x.dim(0), x.dim(2) * x.dim(3)};
    if (x.rank() == 2 && x.dim(1) == ch_) return {x.dim(0), 1};
    throw ShapeError(name() + ": unexpected input shape " + shape_string(x.shape()));
  }

  template <class Fn>
  void for_channel(int n, int inner, int c, Fn&& fn) const {
    for (int s = 0; s < n; ++s) {
      const std::size_t base = (static_cast<std::size_t>(s) * ch_ + c) * inner;
      for (int i = 0; i < inner; ++i) fn(base + i);
    }
  }

  int ch_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  std::vector<int> in_shape_;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

// Fully connected layer; rank-4 inputs are flattened per sample.
template <class T>
class Linear final : public Layer<T> {
 public:
  Linear(int in_dim, int out_dim, Rng& rng) : in_(in_dim), out_(out_dim) {
    weight_ = {"weight", Tensor<T>({out_dim, in_dim}), Tensor<T>({out_dim, in_dim})};
    bias_ = {"bias", Tensor<T>({out_dim}), Tensor<T>({out_dim})};
    init_uniform(weight_.value, in_dim, rng);
    init_uniform(bias_.value, in_dim, rng);
  }

  LayerKind kind() const override { return LayerKind::kLinear; }
  std::string name() const override { return "linear" + std::to_string(out_); }

  Tensor<T> infer(const Tensor<T>& x) const override {
    CYTO_CHECK(x.rank() >= 2 && x.sample_size() == static_cast<std::size_t>(in_), ShapeError,
               name() + ": expected " + std::to_string(in_) + " features per sample, got " +
                   shape_string(x.shape()));
    const int n = x.dim(0);
    Tensor<T> y({n, out_});
    ConstMatMap<T> xm(x.data(), n, in_);
    ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), out_);
    ym.rowwise() += b;
    return y;
  }

  Tensor<T> forward_train(const Tensor<T>& x) override {
    auto y = infer(x);
    input_ = x;
    cached_ = true;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    this->require(cached_, name());
    const int n = input_.dim(0);
    CYTO_CHECK(dy.shape() == (std::vector<int>{n, out_}), ShapeError, name() + ": upstream shape mismatch");
    ConstMatMap<T> xm(input_.data(), n, in_);
    ConstMatMap<T> g(dy.data(), n, out_);
    MatMap<T> dw(weight_.grad.data(), out_, in_);
    dw.noalias() += g.transpose() * xm;
    for (int o = 0; o < out_; ++o) bias_.grad[o] += ordered_sum(g.data() + o, n, out_);
    Tensor<T> dx(input_.shape());
    MatMap<T> dxm(dx.data(), n, in_);
    ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    dxm.noalias() = g * wm;
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  void release() override {
    input_ = Tensor<T>();
    cached_ = false;
  }

 private:
  int in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
  bool cached_ = false;
};

}  // namespace cyto::nn
