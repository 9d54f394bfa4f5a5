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
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "collm/arch.hpp"
#include "collm/checkpoint.hpp"
#include "collm/dataset.hpp"
#include "collm/errors.hpp"
#include "collm/metrics.hpp"
#include "collm/network.hpp"
#include "collm/radam.hpp"
#include "collm/rng.hpp"

namespace collm {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double val_fraction = 0.1;
  std::size_t patience = 5;
  std::uint64_t seed = 7;
  /// Overrides every dropout rate in the architecture when set.
  std::optional<double> dropout;
  RAdamConfig optimizer{};

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (!(val_fraction >= 0.0 && val_fraction < 0.5)) {
      throw ConfigError("validation fraction must lie in [0, 0.5)");
    }
    if (dropout && !(*dropout >= 0.0 && *dropout < 1.0)) {
      throw ConfigError("dropout rate must lie in [0, 1)");
    }
    if (!(optimizer.lr > 0.0)) throw ConfigError("learning rate must be positive");
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  std::size_t validation_size = 0;
};

/// Tracks the best validation score; `update` returns false once training
/// should stop (more than `patience` epochs without strict improvement).
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  bool update(double score) {
    if (!has_best_ || score > best_) {
      best_ = score;
      has_best_ = true;
      improved_ = true;
      waited_ = 0;
      return true;
    }
    improved_ = false;
    return ++waited_ <= patience_;
  }

  bool improved() const noexcept { return improved_; }
  std::optional<double> best() const noexcept {
    return has_best_ ? std::optional<double>(best_) : std::nullopt;
  }

 private:
  std::size_t patience_;
  std::size_t waited_ = 0;
  double best_ = 0.0;
  bool has_best_ = false;
  bool improved_ = false;
};

inline ArchitectureSpec with_dropout(ArchitectureSpec spec, double rate) {
  auto apply = [rate](std::vector<LayerSpec>& layers) {
    for (auto& l : layers) {
      if (l.kind == LayerKind::dropout) l.rate = rate;
    }
  };
  for (auto& s : spec.streams) apply(s);
  apply(spec.head);
  return spec;
}

namespace detail {

template <typename T>
Sample<T> make_sample(int label, std::initializer_list<const std::vector<float>*> vectors) {
  Sample<T> s;
  s.label = label;
  for (const auto* v : vectors) {
    s.inputs.push_back(Tensor<T>::vector(std::vector<T>(v->begin(), v->end())));
  }
  return s;
}

template <typename T>
std::vector<int> predict_labels(Network<T>& net, std::span<const Sample<T>> samples,
                                const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    const Tensor<T> probs = net.predict_proba(samples[i].inputs);
    std::vector<double> p(probs.values().begin(), probs.values().end());
    out.push_back(argmax_label(p));
  }
  return out;
}

template <typename T>
TrainResult train_samples(ArchitectureSpec arch, const std::vector<Sample<T>>& samples,
                          const std::string& language, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.dropout) arch = with_dropout(std::move(arch), *cfg.dropout);
  std::vector<int> labels;
  labels.reserve(samples.size());
  std::size_t positives = 0;
  for (const auto& s : samples) {
    if (s.label != 0 && s.label != 1) throw DataError("training label must be 0 or 1");
    labels.push_back(s.label);
    positives += static_cast<std::size_t>(s.label);
  }
  if (positives == 0 || positives == samples.size()) {
    throw DataError("training data for '" + language + "' lacks examples of class " +
                    std::to_string(positives == 0 ? 1 : 0));
  }

  const Rng master(cfg.seed);
  Rng split_rng = master.fork(1);
  auto [train_idx, val_idx] = stratified_split(labels, cfg.val_fraction, split_rng);
  if (train_idx.empty()) throw DataError("validation split leaves no training data");
  const std::vector<std::size_t>& monitor_idx = val_idx.empty() ? train_idx : val_idx;
  std::vector<int> monitor_truth;
  for (std::size_t i : monitor_idx) monitor_truth.push_back(labels[i]);

  Network<T> net(arch);
  net.initialize(cfg.seed);
  RAdam<T> optimizer(cfg.optimizer);
  Rng shuffle_rng = master.fork(2);
  Rng dropout_rng = master.fork(3);
  ForwardContext train_ctx{true, &dropout_rng};

  TrainResult result;
  result.validation_size = val_idx.size();
  EarlyStopping stopper(cfg.patience);
  WeightMap best_weights = net.export_weights();
  std::vector<std::size_t> order = train_idx;
  std::vector<const Sample<T>*> batch;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(&samples[order[k]]);
      const T loss = batch_gradients(net, std::span<const Sample<T>* const>(batch), train_ctx);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw DataError("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
      optimizer.step(net.parameters());
    }

    const auto predicted = predict_labels(net, std::span<const Sample<T>>(samples), monitor_idx);
    const MetricsReport val = compute_metrics(monitor_truth, predicted);
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(order.size()), val.accuracy, val.macro_f1});
    const bool keep_going = stopper.update(val.macro_f1);
    if (stopper.improved()) {
      best_weights = net.export_weights();
      result.best_epoch = epoch;
    }
    if (!keep_going) break;
  }

  result.checkpoint = Checkpoint{arch, std::move(best_weights), {language}, 1, cfg.seed};
  return result;
}

}  // namespace detail

/// Trains a single-input classifier with RAdam on mean cross-entropy, using a
/// stratified validation split for early stopping on macro-F1 and restoring
/// the best epoch's weights. Deterministic for a fixed seed.
template <typename T = float>
TrainResult train(const ArchitectureSpec& arch, const EmbeddingDataset& data, const TrainConfig& cfg) {
  validate(arch);
  if (arch.inputs.size() != 1) throw ConfigError("architecture expects two inputs; use train_fusion");
  if (arch.inputs[0].dim != data.dim()) {
    throw ConfigError("dataset dimension " + std::to_string(data.dim()) +
                      " does not match architecture input " + std::to_string(arch.inputs[0].dim));
  }
  if (data.records.empty()) throw DataError("training dataset is empty");
  std::vector<Sample<T>> samples;
  samples.reserve(data.size());
  for (const auto& r : data.records) samples.push_back(detail::make_sample<T>(r.label, {&r.vector}));
  return detail::train_samples(arch, samples, data.language, cfg);
}

/// Two-stream variant for fusion architectures.
template <typename T = float>
TrainResult train_fusion(const ArchitectureSpec& arch, const PairedDataset& data,
                         const TrainConfig& cfg) {
  validate(arch);
  if (arch.inputs.size() != 2) throw ConfigError("architecture is not a two-stream fusion model");
  if (arch.inputs[0].dim != data.first_ptm.dim || arch.inputs[1].dim != data.second_ptm.dim) {
    throw ConfigError("paired dataset dimensions do not match the fusion architecture");
  }
  if (data.records.empty()) throw DataError("training dataset is empty");
  std::vector<Sample<T>> samples;
  for (const auto& r : data.records) {
    samples.push_back(detail::make_sample<T>(r.label, {&r.first, &r.second}));
  }
  return detail::train_samples(arch, samples, data.language, cfg);
}

}  // namespace collm
