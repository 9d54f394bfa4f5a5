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

// Forward kernels for the closed layer set. All functions operate on a single
// sample; the batch dimension lives in the training loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "collm/errors.hpp"
#include "collm/rng.hpp"
#include "collm/tensor.hpp"

namespace collm {

/// Valid-padding, stride-1 1D convolution.
/// input [C_in x L], weight [C_out x C_in x k], bias [C_out] -> [C_out x (L-k+1)].
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  expect_rank(input, 2, "conv1d input");
  expect_rank(weight, 3, "conv1d weight");
  const std::size_t c_in = input.dim(0), length = input.dim(1);
  const std::size_t c_out = weight.dim(0), kernel = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw ShapeError("conv1d: weight " + shape_string(weight.shape()) + " expects " +
                     std::to_string(weight.dim(1)) + " input channels, input is " +
                     shape_string(input.shape()));
  }
  expect_shape(bias, {c_out}, "conv1d bias");
  if (length < kernel) {
    throw ShapeError("conv1d: input length " + std::to_string(length) + " shorter than kernel " +
                     std::to_string(kernel));
  }
  const std::size_t out_len = length - kernel + 1;
  Tensor<T> out({c_out, out_len});
  for (std::size_t o = 0; o < c_out; ++o) {
    T* row = &out.at(o, 0);
    std::fill(row, row + out_len, bias[o]);
    for (std::size_t c = 0; c < c_in; ++c) {
      const T* x = &input.at(c, 0);
      for (std::size_t j = 0; j < kernel; ++j) {
        const T w = weight.at(o, c, j);
        const T* xs = x + j;
        for (std::size_t t = 0; t < out_len; ++t) row[t] += w * xs[t];
      }
    }
  }
  return out;
}

inline std::size_t pooled_length(std::size_t length, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw ConfigError("maxpool1d: window and stride must be positive");
  if (window > length) {
    throw ShapeError("maxpool1d: window " + std::to_string(window) + " exceeds input length " +
                     std::to_string(length));
  }
  return (length - window) / stride + 1;
}

template <typename T>
struct PoolResult {
  Tensor<T> output;
  /// Flat input index of the selected element for each output element.
  std::vector<std::size_t> argmax;
};

/// Max pooling over the last axis of [C x L]. Ties pick the first maximum.
template <typename T>
PoolResult<T> maxpool1d_forward(const Tensor<T>& input, std::size_t window, std::size_t stride) {
  expect_rank(input, 2, "maxpool1d input");
  const std::size_t channels = input.dim(0), length = input.dim(1);
  const std::size_t out_len = pooled_length(length, window, stride);
  PoolResult<T> result{Tensor<T>({channels, out_len}), std::vector<std::size_t>(channels * out_len)};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = c * length + t * stride;
      for (std::size_t j = 1; j < window; ++j) {
        const std::size_t idx = c * length + t * stride + j;
        if (input[idx] > input[best]) best = idx;
      }
      result.output.at(c, t) = input[best];
      result.argmax[c * out_len + t] = best;
    }
  }
  return result;
}

/// input [D], weight [U x D], bias [U] -> [U].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  expect_rank(input, 1, "dense input");
  expect_rank(weight, 2, "dense weight");
  const std::size_t units = weight.dim(0), in = weight.dim(1);
  if (input.dim(0) != in) {
    throw ShapeError("dense: weight " + shape_string(weight.shape()) + " does not accept input " +
                     shape_string(input.shape()));
  }
  expect_shape(bias, {units}, "dense bias");
  Tensor<T> out({units});
  for (std::size_t u = 0; u < units; ++u) {
    const T* w = &weight.at(u, 0);
    T acc = 0;
    for (std::size_t d = 0; d < in; ++d) acc += w[d] * input[d];
    out[u] = acc + bias[u];
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

/// Numerically stable softmax along the last axis (rank 1 or 2).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw ShapeError("softmax: expected rank 1 or 2, got " + shape_string(logits.shape()));
  }
  Tensor<T> out = logits;
  const std::size_t width = logits.shape().back();
  const std::size_t rows = logits.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.data().data() + r * width;
    const T peak = *std::max_element(row, row + width);
    T total = 0;
    for (std::size_t i = 0; i < width; ++i) {
      row[i] = std::exp(row[i] - peak);
      total += row[i];
    }
    for (std::size_t i = 0; i < width; ++i) row[i] /= total;
  }
  return out;
}

/// Layer normalization over the last axis with learned gain and shift (both [W]).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& shift, T eps) {
  const std::size_t width = x.shape().back();
  expect_shape(gain, {width}, "layer_norm gain");
  expect_shape(shift, {width}, "layer_norm shift");
  Tensor<T> out = x;
  const std::size_t rows = x.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * width;
    T* row = out.data().data() + r * width;
    T mean = 0;
    for (std::size_t i = 0; i < width; ++i) mean += in[i];
    mean /= static_cast<T>(width);
    T var = 0;
    for (std::size_t i = 0; i < width; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<T>(width);
    const T inv = T{1} / std::sqrt(var + eps);
    for (std::size_t i = 0; i < width; ++i) row[i] = gain[i] * (in[i] - mean) * inv + shift[i];
  }
  return out;
}

/// Projection weights of one multi-head attention sublayer. Matrices are
/// [d_model x d_model] and applied on the right: Q = X Wq + bq.
template <typename T>
struct MhaWeights {
  Tensor<T> wq, wk, wv, wo;
  Tensor<T> bq, bk, bv, bo;
};

/// Intermediates retained for the backward pass.
template <typename T>
struct MhaCache {
  Tensor<T> q, k, v;
  std::vector<Tensor<T>> attention;  // one [T x T] matrix per head
  Tensor<T> context;                 // concatenated head outputs [T x d_model]
};

/// Y = X W + b for X [n x in], W [in x out], b [out].
template <typename T>
Tensor<T> affine_rows(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const std::size_t n = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  if (w.dim(0) != in) {
    throw ShapeError("affine: weight " + shape_string(w.shape()) + " does not accept rows of " +
                     shape_string(x.shape()));
  }
  expect_shape(b, {out_dim}, "affine bias");
  Tensor<T> y({n, out_dim});
  for (std::size_t r = 0; r < n; ++r) {
    T* yr = &y.at(r, 0);
    for (std::size_t o = 0; o < out_dim; ++o) yr[o] = b[o];
    for (std::size_t i = 0; i < in; ++i) {
      const T xv = x.at(r, i);
      const T* wr = &w.at(i, 0);
      for (std::size_t o = 0; o < out_dim; ++o) yr[o] += xv * wr[o];
    }
  }
  return y;
}

/// Scaled dot-product multi-head attention over x [T x d_model]; returns the
/// output projection before any residual connection.
template <typename T>
Tensor<T> mha_forward(const Tensor<T>& x, const MhaWeights<T>& weights, std::size_t heads,
                      MhaCache<T>* cache = nullptr) {
  expect_rank(x, 2, "mha input");
  const std::size_t steps = x.dim(0), d_model = x.dim(1);
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("mha: model width " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  for (const Tensor<T>* w : {&weights.wq, &weights.wk, &weights.wv, &weights.wo}) {
    expect_shape(*w, {d_model, d_model}, "mha projection");
  }
  const std::size_t d_head = d_model / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(d_head));

  Tensor<T> q = affine_rows(x, weights.wq, weights.bq);
  Tensor<T> k = affine_rows(x, weights.wk, weights.bk);
  Tensor<T> v = affine_rows(x, weights.wv, weights.bv);
  Tensor<T> context({steps, d_model});
  std::vector<Tensor<T>> attention;
  attention.reserve(heads);

  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * d_head;
    Tensor<T> scores({steps, steps});
    for (std::size_t i = 0; i < steps; ++i) {
      for (std::size_t j = 0; j < steps; ++j) {
        T dot = 0;
        for (std::size_t e = 0; e < d_head; ++e) dot += q.at(i, off + e) * k.at(j, off + e);
        scores.at(i, j) = dot * scale;
      }
    }
    Tensor<T> probs = softmax(scores);
    for (std::size_t i = 0; i < steps; ++i) {
      for (std::size_t e = 0; e < d_head; ++e) {
        T acc = 0;
        for (std::size_t j = 0; j < steps; ++j) acc += probs.at(i, j) * v.at(j, off + e);
        context.at(i, off + e) = acc;
      }
    }
    attention.push_back(std::move(probs));
  }

  Tensor<T> out = affine_rows(context, weights.wo, weights.bo);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attention = std::move(attention);
    cache->context = std::move(context);
  }
  return out;
}

/// Inverted dropout. Returns x unchanged outside training or when rate is 0;
/// otherwise zeroes each element with probability `rate` and scales survivors
/// by 1/(1-rate). `mask` (optional) receives the per-element multiplier.
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, Rng& rng, bool training,
                          std::vector<T>* mask = nullptr) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) {
    if (mask) mask->assign(x.size(), T{1});
    return x;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> out = x;
  std::vector<T> local;
  std::vector<T>& m = mask ? *mask : local;
  m.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng.uniform() < rate ? T{0} : keep_scale;
    out[i] *= m[i];
  }
  return out;
}

}  // namespace collm
