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

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "collm/arch.hpp"
#include "collm/errors.hpp"
#include "collm/layers.hpp"
#include "collm/loss.hpp"
#include "collm/ops.hpp"
#include "collm/rng.hpp"
#include "collm/tensor.hpp"

namespace collm {

/// Named weights of a model, lexicographically ordered by name.
using WeightMap = std::map<std::string, Tensor<double>>;

template <typename T>
struct NamedParam {
  std::string name;
  Param<T>* param;
};

inline std::string layer_prefix(const std::string& section, std::size_t index, LayerKind kind) {
  std::string idx = std::to_string(index);
  if (idx.size() < 2) idx.insert(0, "0");
  return section + "." + idx + "_" + std::string(to_string(kind));
}

/// Runtime instance of an ArchitectureSpec with mutable per-sample caches.
/// One instance must not be shared between threads.
template <typename T>
class Network {
 public:
  explicit Network(ArchitectureSpec spec) : spec_(std::move(spec)) {
    stream_widths_ = validate(spec_);
    for (std::size_t s = 0; s < spec_.streams.size(); ++s) {
      std::vector<std::unique_ptr<Layer<T>>> layers;
      for (std::size_t i = 0; i < spec_.streams[s].size(); ++i) {
        layers.push_back(make_layer<T>(spec_.streams[s][i]));
        register_params("s" + std::to_string(s), i, *layers.back());
      }
      streams_.push_back(std::move(layers));
    }
    for (std::size_t i = 0; i + 1 < spec_.head.size(); ++i) {
      head_.push_back(make_layer<T>(spec_.head[i]));
      register_params("head", i, *head_.back());
    }
    std::sort(named_.begin(), named_.end(),
              [](const NamedParam<T>& a, const NamedParam<T>& b) { return a.name < b.name; });
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const ArchitectureSpec& spec() const noexcept { return spec_; }
  const std::vector<std::size_t>& stream_widths() const noexcept { return stream_widths_; }
  std::size_t num_classes() const noexcept { return spec_.num_classes(); }

  /// Glorot-uniform weights, zero biases, unit layer-norm gains. Values are
  /// drawn in double so f32 and f64 instances from one seed agree.
  void initialize(std::uint64_t seed) {
    Rng rng = Rng(seed).fork(0);
    for (auto& stream : streams_) {
      for (auto& layer : stream) init_layer(*layer, rng);
    }
    for (auto& layer : head_) init_layer(*layer, rng);
  }

  /// Parameters sorted by full name ("s0.00_conv1d.weight", "head.07_dense.bias", ...).
  const std::vector<NamedParam<T>>& parameters() noexcept { return named_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : named_) n += p.param->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : named_) p.param->grad.fill(T{0});
  }

  /// Logits for one sample. `inputs` holds one embedding per stream.
  Tensor<T> forward(std::span<const Tensor<T>> inputs, ForwardContext& ctx) {
    if (inputs.size() != streams_.size()) {
      throw DataError("model expects " + std::to_string(streams_.size()) + " input vector(s), got " +
                      std::to_string(inputs.size()));
    }
    std::vector<T> joined;
    for (std::size_t s = 0; s < streams_.size(); ++s) {
      const std::size_t dim = spec_.inputs[s].dim;
      if (inputs[s].size() != dim) {
        throw DataError("input " + std::to_string(s) + " has dimension " +
                        std::to_string(inputs[s].size()) + ", model expects " + std::to_string(dim));
      }
      Tensor<T> x = inputs[s].reshaped(stream_input_shape(spec_.streams[s], dim));
      for (auto& layer : streams_[s]) x = layer->forward(x, ctx);
      joined.insert(joined.end(), x.values().begin(), x.values().end());
    }
    Tensor<T> h = Tensor<T>::vector(std::move(joined));
    for (auto& layer : head_) h = layer->forward(h, ctx);
    has_forward_ = true;
    return h;
  }

  Tensor<T> forward(const Tensor<T>& input, ForwardContext& ctx) {
    return forward(std::span<const Tensor<T>>(&input, 1), ctx);
  }

  /// Backpropagates d(loss)/d(logits) of the last forward call into the
  /// parameter gradient accumulators.
  void backward(const Tensor<T>& grad_logits) {
    if (!has_forward_) throw UsageError("backward called without a forward pass");
    Tensor<T> g = grad_logits;
    for (auto it = head_.rbegin(); it != head_.rend(); ++it) g = (*it)->backward(g);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < streams_.size(); ++s) {
      const std::size_t width = stream_widths_[s];
      std::vector<T> part(g.values().begin() + static_cast<std::ptrdiff_t>(offset),
                          g.values().begin() + static_cast<std::ptrdiff_t>(offset + width));
      offset += width;
      Tensor<T> gs = Tensor<T>::vector(std::move(part));
      for (auto it = streams_[s].rbegin(); it != streams_[s].rend(); ++it) gs = (*it)->backward(gs);
    }
    has_forward_ = false;
  }

  /// Inference-mode class probabilities.
  Tensor<T> predict_proba(std::span<const Tensor<T>> inputs) {
    ForwardContext ctx;
    return softmax(forward(inputs, ctx));
  }

  WeightMap export_weights() {
    WeightMap out;
    for (const auto& p : named_) out.emplace(p.name, p.param->value.template cast<double>());
    return out;
  }

  /// Replaces every parameter; names and shapes must match exactly.
  void import_weights(const WeightMap& weights) {
    if (weights.size() != named_.size()) {
      throw CompatibilityError("weight set has " + std::to_string(weights.size()) +
                               " tensors, architecture needs " + std::to_string(named_.size()));
    }
    for (auto& p : named_) {
      auto it = weights.find(p.name);
      if (it == weights.end()) throw CompatibilityError("missing weight tensor '" + p.name + "'");
      if (it->second.shape() != p.param->value.shape()) {
        throw CompatibilityError("tensor '" + p.name + "' has shape " +
                                 shape_string(it->second.shape()) + ", expected " +
                                 shape_string(p.param->value.shape()));
      }
      p.param->value = it->second.template cast<T>();
    }
  }

 private:
  void register_params(const std::string& section, std::size_t index, Layer<T>& layer) {
    const std::string prefix = layer_prefix(section, index, layer.spec().kind);
    for (auto& p : layer.params()) named_.push_back({prefix + "." + p.name, &p});
  }

  static void init_layer(Layer<T>& layer, Rng& rng) {
    if (layer.params().empty()) return;
    // Draw into a double-precision twin so the values do not depend on T.
    auto twin = make_layer<double>(layer.spec());
    twin->initialize(rng);
    for (std::size_t i = 0; i < layer.params().size(); ++i) {
      layer.params()[i].value = twin->params()[i].value.template cast<T>();
    }
  }

  ArchitectureSpec spec_;
  std::vector<std::size_t> stream_widths_;
  std::vector<std::vector<std::unique_ptr<Layer<T>>>> streams_;
  std::vector<std::unique_ptr<Layer<T>>> head_;
  std::vector<NamedParam<T>> named_;
  bool has_forward_ = false;
};

/// One labelled example: an embedding per stream.
template <typename T>
struct Sample {
  std::vector<Tensor<T>> inputs;
  int label = 0;
};

/// Zeroes the gradients, then accumulates the gradient of the mean
/// cross-entropy over `batch`. Returns the mean loss.
template <typename T>
T batch_gradients(Network<T>& net, std::span<const Sample<T>* const> batch, ForwardContext& ctx) {
  if (batch.empty()) throw UsageError("batch_gradients: empty batch");
  net.zero_grad();
  const T inv_batch = T{1} / static_cast<T>(batch.size());
  T total = 0;
  for (const Sample<T>* sample : batch) {
    Tensor<T> logits = net.forward(std::span<const Tensor<T>>(sample->inputs), ctx);
    total += sample_cross_entropy<T>(logits.data(), sample->label);
    Tensor<T> grad = softmax(logits);
    grad[static_cast<std::size_t>(sample->label)] -= T{1};
    for (T& v : grad.values()) v *= inv_batch;
    net.backward(grad);
  }
  return total * inv_batch;
}

template <typename T>
T batch_gradients(Network<T>& net, std::span<const Sample<T>> batch, ForwardContext& ctx) {
  std::vector<const Sample<T>*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return batch_gradients(net, std::span<const Sample<T>* const>(ptrs), ctx);
}

}  // namespace collm
