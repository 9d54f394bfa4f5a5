// Copyright 2026 The CoLLM Toolkit Authors
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
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "collm/errors.hpp"
#include "collm/layer_spec.hpp"
#include "collm/ops.hpp"
#include "collm/rng.hpp"
#include "collm/tensor.hpp"

namespace collm {

/// Trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;  // local to the layer, e.g. "weight"
  Tensor<T> value;
  Tensor<T> grad;

  Param(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}
};

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout
};

/// Single-sample layer with cached activations. Not thread-safe: forward
/// stores state consumed by the next backward.
template <typename T>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  virtual Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void initialize(Rng&) {}

  const LayerSpec& spec() const noexcept { return spec_; }
  std::vector<Param<T>>& params() noexcept { return params_; }
  const std::vector<Param<T>>& params() const noexcept { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(T{0});
  }

 protected:
  void require_cache() const {
    if (!cached_) {
      throw UsageError(std::string(to_string(spec_.kind)) +
                       ": backward called without a preceding forward pass");
    }
  }

  static void glorot(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (T& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  }

  LayerSpec spec_;
  std::vector<Param<T>> params_;
  bool cached_ = false;
};

template <typename T>
class Conv1dLayer final : public Layer<T> {
 public:
  explicit Conv1dLayer(LayerSpec spec) : Layer<T>(std::move(spec)) {
    const auto& s = this->spec_;
    this->params_.emplace_back("weight", Shape{s.out_channels, s.in_channels, s.kernel});
    this->params_.emplace_back("bias", Shape{s.out_channels});
  }

  void initialize(Rng& rng) override {
    const auto& s = this->spec_;
    this->glorot(this->params_[0].value, s.in_channels * s.kernel, s.out_channels * s.kernel, rng);
    this->params_[1].value.fill(T{0});
  }

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    input_ = x;
    this->cached_ = true;
    return conv1d_forward(x, this->params_[0].value, this->params_[1].value);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    const Tensor<T>& w = this->params_[0].value;
    Tensor<T>& dw = this->params_[0].grad;
    Tensor<T>& db = this->params_[1].grad;
    const std::size_t c_out = w.dim(0), c_in = w.dim(1), kernel = w.dim(2);
    const std::size_t out_len = g.dim(1);
    expect_shape(g, {c_out, input_.dim(1) - kernel + 1}, "conv1d grad");
    Tensor<T> dx(input_.shape());
    for (std::size_t o = 0; o < c_out; ++o) {
      const T* go = &g.at(o, 0);
      T bsum = 0;
      for (std::size_t t = 0; t < out_len; ++t) bsum += go[t];
      db[o] += bsum;
      for (std::size_t c = 0; c < c_in; ++c) {
        const T* x = &input_.at(c, 0);
        T* dxc = &dx.at(c, 0);
        for (std::size_t j = 0; j < kernel; ++j) {
          T acc = 0;
          const T wv = w.at(o, c, j);
          for (std::size_t t = 0; t < out_len; ++t) {
            acc += go[t] * x[t + j];
            dxc[t + j] += wv * go[t];
          }
          dw.at(o, c, j) += acc;
        }
      }
    }
    this->cached_ = false;
    return dx;
  }

 private:
  Tensor<T> input_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    auto pooled = maxpool1d_forward(x, this->spec_.window, this->spec_.stride);
    input_shape_ = x.shape();
    argmax_ = std::move(pooled.argmax);
    this->cached_ = true;
    return std::move(pooled.output);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    Tensor<T> dx(input_shape_);
    for (std::size_t i = 0; i < argmax_.size(); ++i) dx[argmax_[i]] += g[i];
    this->cached_ = false;
    return dx;
  }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    input_ = x;
    this->cached_ = true;
    return relu(x);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(input_[i] > T{0})) dx[i] = T{0};
    }
    this->cached_ = false;
    return dx;
  }

 private:
  Tensor<T> input_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  explicit DenseLayer(LayerSpec spec) : Layer<T>(std::move(spec)) {
    this->params_.emplace_back("weight", Shape{this->spec_.units, this->spec_.in_features});
    this->params_.emplace_back("bias", Shape{this->spec_.units});
  }

  void initialize(Rng& rng) override {
    this->glorot(this->params_[0].value, this->spec_.in_features, this->spec_.units, rng);
    this->params_[1].value.fill(T{0});
  }

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    input_ = x;
    this->cached_ = true;
    return dense_forward(x, this->params_[0].value, this->params_[1].value);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    const Tensor<T>& w = this->params_[0].value;
    Tensor<T>& dw = this->params_[0].grad;
    Tensor<T>& db = this->params_[1].grad;
    const std::size_t units = w.dim(0), in = w.dim(1);
    expect_shape(g, {units}, "dense grad");
    Tensor<T> dx({in});
    for (std::size_t u = 0; u < units; ++u) {
      const T gu = g[u];
      db[u] += gu;
      if (gu == T{0}) continue;
      const T* wr = &w.at(u, 0);
      T* dwr = &dw.at(u, 0);
      for (std::size_t d = 0; d < in; ++d) {
        dwr[d] += gu * input_[d];
        dx[d] += wr[d] * gu;
      }
    }
    this->cached_ = false;
    return dx;
  }

 private:
  Tensor<T> input_;
};

template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override {
    const bool active = ctx.training && this->spec_.rate > 0.0;
    if (active && ctx.rng == nullptr) {
      throw UsageError("dropout: training forward requires an Rng");
    }
    Rng unused(0);
    Tensor<T> out = dropout_forward(x, this->spec_.rate, active ? *ctx.rng : unused, active, &mask_);
    this->cached_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
    this->cached_ = false;
    return dx;
  }

 private:
  std::vector<T> mask_;
};

/// Normalizes each row (last axis) of its input.
template <typename T>
class LayerNormLayer final : public Layer<T> {
 public:
  explicit LayerNormLayer(LayerSpec spec) : Layer<T>(std::move(spec)) {
    this->params_.emplace_back("gain", Shape{this->spec_.width});
    this->params_.emplace_back("shift", Shape{this->spec_.width});
  }

  void initialize(Rng&) override {
    this->params_[0].value.fill(T{1});
    this->params_[1].value.fill(T{0});
  }

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    const std::size_t width = this->spec_.width;
    if (x.shape().back() != width) {
      throw ShapeError("layernorm: input " + shape_string(x.shape()) + " does not end in width " +
                       std::to_string(width));
    }
    const T eps = static_cast<T>(this->spec_.eps);
    const std::size_t rows = x.size() / width;
    normalized_ = Tensor<T>(x.shape());
    inv_std_.assign(rows, T{0});
    Tensor<T> out(x.shape());
    const auto& gain = this->params_[0].value;
    const auto& shift = this->params_[1].value;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* in = x.data().data() + r * width;
      T mean = 0;
      for (std::size_t i = 0; i < width; ++i) mean += in[i];
      mean /= static_cast<T>(width);
      T var = 0;
      for (std::size_t i = 0; i < width; ++i) var += (in[i] - mean) * (in[i] - mean);
      var /= static_cast<T>(width);
      const T inv = T{1} / std::sqrt(var + eps);
      inv_std_[r] = inv;
      for (std::size_t i = 0; i < width; ++i) {
        const T xhat = (in[i] - mean) * inv;
        normalized_[r * width + i] = xhat;
        out[r * width + i] = gain[i] * xhat + shift[i];
      }
    }
    this->cached_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    const std::size_t width = this->spec_.width;
    const std::size_t rows = g.size() / width;
    const auto& gain = this->params_[0].value;
    auto& dgain = this->params_[0].grad;
    auto& dshift = this->params_[1].grad;
    Tensor<T> dx(g.shape());
    std::vector<T> dxhat(width);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* gr = g.data().data() + r * width;
      const T* xh = normalized_.data().data() + r * width;
      T sum_d = 0, sum_dx = 0;
      for (std::size_t i = 0; i < width; ++i) {
        dgain[i] += gr[i] * xh[i];
        dshift[i] += gr[i];
        dxhat[i] = gr[i] * gain[i];
        sum_d += dxhat[i];
        sum_dx += dxhat[i] * xh[i];
      }
      const T n = static_cast<T>(width);
      for (std::size_t i = 0; i < width; ++i) {
        dx[r * width + i] = inv_std_[r] / n * (n * dxhat[i] - sum_d - xh[i] * sum_dx);
      }
    }
    this->cached_ = false;
    return dx;
  }

 private:
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
};

/// Accumulates dW += X^T dY, db += colsum(dY) and returns dX = dY W^T for Y = X W + b.
template <typename T>
Tensor<T> affine_rows_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                               Tensor<T>& dw, Tensor<T>& db) {
  const std::size_t n = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  Tensor<T> dx({n, in});
  for (std::size_t r = 0; r < n; ++r) {
    const T* dyr = &dy.at(r, 0);
    for (std::size_t o = 0; o < out_dim; ++o) db[o] += dyr[o];
    for (std::size_t i = 0; i < in; ++i) {
      const T xv = x.at(r, i);
      const T* wr = &w.at(i, 0);
      T* dwr = &dw.at(i, 0);
      T acc = 0;
      for (std::size_t o = 0; o < out_dim; ++o) {
        dwr[o] += xv * dyr[o];
        acc += wr[o] * dyr[o];
      }
      dx.at(r, i) = acc;
    }
  }
  return dx;
}

/// Residual self-attention sublayer: y = x + MHA(x). The layer norm that
/// follows in a post-norm encoder is a separate layer.
template <typename T>
class AttentionLayer final : public Layer<T> {
 public:
  explicit AttentionLayer(LayerSpec spec) : Layer<T>(std::move(spec)) {
    const std::size_t d = this->spec_.width;
    for (const char* name : {"wq", "wk", "wv", "wo"}) this->params_.emplace_back(name, Shape{d, d});
    for (const char* name : {"bq", "bk", "bv", "bo"}) this->params_.emplace_back(name, Shape{d});
  }

  void initialize(Rng& rng) override {
    const std::size_t d = this->spec_.width;
    for (std::size_t i = 0; i < 4; ++i) this->glorot(this->params_[i].value, d, d, rng);
    for (std::size_t i = 4; i < 8; ++i) this->params_[i].value.fill(T{0});
  }

  MhaWeights<T> weights() const {
    const auto& p = this->params_;
    return {p[0].value, p[1].value, p[2].value, p[3].value,
            p[4].value, p[5].value, p[6].value, p[7].value};
  }

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    expect_rank(x, 2, "attention input");
    if (x.dim(1) != this->spec_.width) {
      throw ShapeError("attention: input " + shape_string(x.shape()) + " does not have width " +
                       std::to_string(this->spec_.width));
    }
    input_ = x;
    Tensor<T> out = mha_forward(x, weights(), this->spec_.heads, &cache_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
    this->cached_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    auto& p = this->params_;
    const std::size_t steps = input_.dim(0), d = this->spec_.width;
    const std::size_t heads = this->spec_.heads, d_head = d / heads;
    const T scale = T{1} / std::sqrt(static_cast<T>(d_head));

    Tensor<T> d_context = affine_rows_backward(cache_.context, p[3].value, g, p[3].grad, p[7].grad);
    Tensor<T> dq({steps, d}), dk({steps, d}), dv({steps, d});
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * d_head;
      const Tensor<T>& attn = cache_.attention[h];
      Tensor<T> d_attn({steps, steps});
      for (std::size_t i = 0; i < steps; ++i) {
        for (std::size_t j = 0; j < steps; ++j) {
          T acc = 0;
          for (std::size_t e = 0; e < d_head; ++e) acc += d_context.at(i, off + e) * cache_.v.at(j, off + e);
          d_attn.at(i, j) = acc;
          for (std::size_t e = 0; e < d_head; ++e) {
            dv.at(j, off + e) += attn.at(i, j) * d_context.at(i, off + e);
          }
        }
      }
      for (std::size_t i = 0; i < steps; ++i) {
        T dot = 0;
        for (std::size_t j = 0; j < steps; ++j) dot += d_attn.at(i, j) * attn.at(i, j);
        for (std::size_t j = 0; j < steps; ++j) {
          const T ds = attn.at(i, j) * (d_attn.at(i, j) - dot) * scale;
          if (ds == T{0}) continue;
          for (std::size_t e = 0; e < d_head; ++e) {
            dq.at(i, off + e) += ds * cache_.k.at(j, off + e);
            dk.at(j, off + e) += ds * cache_.q.at(i, off + e);
          }
        }
      }
    }
    Tensor<T> dx = g;
    for (auto [dproj, wi, bi] : {std::tuple{&dq, 0, 4}, std::tuple{&dk, 1, 5}, std::tuple{&dv, 2, 6}}) {
      Tensor<T> part = affine_rows_backward(input_, p[wi].value, *dproj, p[wi].grad, p[bi].grad);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += part[i];
    }
    this->cached_ = false;
    return dx;
  }

 private:
  Tensor<T> input_;
  MhaCache<T> cache_;
};

/// Residual position-wise feed-forward sublayer: y = x + relu(x W1 + b1) W2 + b2.
template <typename T>
class FfnLayer final : public Layer<T> {
 public:
  explicit FfnLayer(LayerSpec spec) : Layer<T>(std::move(spec)) {
    const std::size_t d = this->spec_.width, h = this->spec_.hidden;
    this->params_.emplace_back("w1", Shape{d, h});
    this->params_.emplace_back("b1", Shape{h});
    this->params_.emplace_back("w2", Shape{h, d});
    this->params_.emplace_back("b2", Shape{d});
  }

  void initialize(Rng& rng) override {
    const std::size_t d = this->spec_.width, h = this->spec_.hidden;
    this->glorot(this->params_[0].value, d, h, rng);
    this->params_[1].value.fill(T{0});
    this->glorot(this->params_[2].value, h, d, rng);
    this->params_[3].value.fill(T{0});
  }

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    expect_rank(x, 2, "ffn input");
    input_ = x;
    pre_ = affine_rows(x, this->params_[0].value, this->params_[1].value);
    hidden_ = relu(pre_);
    Tensor<T> out = affine_rows(hidden_, this->params_[2].value, this->params_[3].value);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
    this->cached_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    auto& p = this->params_;
    Tensor<T> dh = affine_rows_backward(hidden_, p[2].value, g, p[2].grad, p[3].grad);
    for (std::size_t i = 0; i < dh.size(); ++i) {
      if (!(pre_[i] > T{0})) dh[i] = T{0};
    }
    Tensor<T> dx = affine_rows_backward(input_, p[0].value, dh, p[0].grad, p[1].grad);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
    this->cached_ = false;
    return dx;
  }

 private:
  Tensor<T> input_, pre_, hidden_;
};

/// [C x L] -> [L x C], turning conv feature maps into a token sequence.
template <typename T>
class TransposeLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  static Tensor<T> transpose(const Tensor<T>& x) {
    expect_rank(x, 2, "transpose input");
    Tensor<T> out({x.dim(1), x.dim(0)});
    for (std::size_t i = 0; i < x.dim(0); ++i) {
      for (std::size_t j = 0; j < x.dim(1); ++j) out.at(j, i) = x.at(i, j);
    }
    return out;
  }

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    this->cached_ = true;
    return transpose(x);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    this->cached_ = false;
    return transpose(g);
  }
};

/// Mean over rows: [T x d] -> [d].
template <typename T>
class GlobalAvgPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    expect_rank(x, 2, "global_avg_pool input");
    input_shape_ = x.shape();
    const std::size_t steps = x.dim(0), width = x.dim(1);
    Tensor<T> out({width});
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t i = 0; i < width; ++i) out[i] += x.at(t, i);
    }
    for (T& v : out.values()) v /= static_cast<T>(steps);
    this->cached_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    const std::size_t steps = input_shape_[0], width = input_shape_[1];
    Tensor<T> dx(input_shape_);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t i = 0; i < width; ++i) dx.at(t, i) = g[i] / static_cast<T>(steps);
    }
    this->cached_ = false;
    return dx;
  }

 private:
  Shape input_shape_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, ForwardContext&) override {
    input_shape_ = x.shape();
    this->cached_ = true;
    return x.reshaped({x.size()});
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    this->require_cache();
    this->cached_ = false;
    return g.reshaped(input_shape_);
  }

 private:
  Shape input_shape_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::conv1d: return std::make_unique<Conv1dLayer<T>>(spec);
    case LayerKind::maxpool1d: return std::make_unique<MaxPoolLayer<T>>(spec);
    case LayerKind::relu: return std::make_unique<ReluLayer<T>>(spec);
    case LayerKind::dense: return std::make_unique<DenseLayer<T>>(spec);
    case LayerKind::dropout: return std::make_unique<DropoutLayer<T>>(spec);
    case LayerKind::layernorm: return std::make_unique<LayerNormLayer<T>>(spec);
    case LayerKind::multihead_attention: return std::make_unique<AttentionLayer<T>>(spec);
    case LayerKind::ffn: return std::make_unique<FfnLayer<T>>(spec);
    case LayerKind::transpose: return std::make_unique<TransposeLayer<T>>(spec);
    case LayerKind::global_avg_pool: return std::make_unique<GlobalAvgPoolLayer<T>>(spec);
    case LayerKind::flatten: return std::make_unique<FlattenLayer<T>>(spec);
    case LayerKind::softmax_head:
      throw ConfigError("softmax_head is applied by the network, not instantiated as a layer");
  }
  throw ConfigError("unhandled layer kind");
}

}  // namespace collm
