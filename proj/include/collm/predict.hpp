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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "collm/checkpoint.hpp"
#include "collm/dataset.hpp"
#include "collm/errors.hpp"
#include "collm/network.hpp"

namespace collm {

struct Prediction {
  std::vector<double> probabilities;
  int label = 0;
};

/// Index of the largest probability; ties resolve to the lower class id, so
/// an exact 0.5/0.5 split predicts non-abusive.
inline int argmax_label(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<int>(best);
}

/// Inference-only wrapper around a checkpoint. Each Predictor owns its
/// network caches; use one per thread.
template <typename T = float>
class Predictor {
 public:
  explicit Predictor(const Checkpoint& ckpt)
      : hash_(ckpt.arch_hash()), net_(network_from_checkpoint<T>(ckpt)) {}

  const std::string& arch_hash() const noexcept { return hash_; }
  const ArchitectureSpec& spec() const noexcept { return net_.spec(); }

  Prediction predict(std::span<const std::vector<float>> vectors) {
    const auto& inputs = net_.spec().inputs;
    if (vectors.size() != inputs.size()) {
      throw DataError("model takes " + std::to_string(inputs.size()) + " embedding(s), got " +
                      std::to_string(vectors.size()));
    }
    std::vector<Tensor<T>> tensors;
    for (std::size_t s = 0; s < vectors.size(); ++s) {
      if (vectors[s].size() != inputs[s].dim) {
        throw DataError("embedding " + std::to_string(s) + " has dimension " +
                        std::to_string(vectors[s].size()) + ", model expects " +
                        std::to_string(inputs[s].dim) + " (" + inputs[s].name + ")");
      }
      std::vector<T> values(vectors[s].begin(), vectors[s].end());
      tensors.push_back(Tensor<T>::vector(std::move(values)));
    }
    const Tensor<T> probs = net_.predict_proba(tensors);
    Prediction p;
    p.probabilities.assign(probs.values().begin(), probs.values().end());
    p.label = argmax_label(p.probabilities);
    return p;
  }

  Prediction predict(const std::vector<float>& vector) {
    return predict(std::span<const std::vector<float>>(&vector, 1));
  }

 private:
  std::string hash_;
  Network<T> net_;
};

/// One-shot prediction in double precision.
inline Prediction predict(const Checkpoint& ckpt, std::span<const std::vector<float>> vectors) {
  Predictor<double> predictor(ckpt);
  return predictor.predict(vectors);
}

inline Prediction predict(const Checkpoint& ckpt, const std::vector<float>& vector) {
  return predict(ckpt, std::span<const std::vector<float>>(&vector, 1));
}

}  // namespace collm
