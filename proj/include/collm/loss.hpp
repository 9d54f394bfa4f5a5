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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "collm/errors.hpp"
#include "collm/tensor.hpp"

namespace collm {

/// log(sum(exp(v))) with max subtraction.
template <typename T>
T log_sum_exp(std::span<const T> v) {
  const T peak = *std::max_element(v.begin(), v.end());
  T total = 0;
  for (T x : v) total += std::exp(x - peak);
  return peak + std::log(total);
}

/// Negative log-likelihood of one sample: logsumexp(z) - z[label].
template <typename T>
T sample_cross_entropy(std::span<const T> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " +
                    std::to_string(logits.size()) + " classes");
  }
  return log_sum_exp(logits) - logits[static_cast<std::size_t>(label)];
}

/// Mean cross-entropy over a batch of logits [B x C].
template <typename T>
T cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  expect_rank(logits, 2, "cross_entropy logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(batch) + " rows");
  }
  if (batch == 0) throw UsageError("cross_entropy: empty batch");
  T total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    total += sample_cross_entropy(logits.data().subspan(b * classes, classes), labels[b]);
  }
  return total / static_cast<T>(batch);
}

}  // namespace collm
