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
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "collm/checkpoint.hpp"
#include "collm/errors.hpp"
#include "collm/network.hpp"

namespace collm {

/// Which weights share one L1 norm.
enum class Granularity {
  per_tensor,   // every named tensor on its own
  per_layer,    // all tensors of a layer (weight + bias, ...) jointly
  whole_model,  // one norm over every parameter
};

enum class Rescale {
  none,
  mean_norm,  // scale each merged group by the mean of the inputs' original norms
};

inline std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::per_tensor: return "per_tensor";
    case Granularity::per_layer: return "per_layer";
    case Granularity::whole_model: return "whole_model";
  }
  return "?";
}

inline std::string_view to_string(Rescale r) { return r == Rescale::none ? "none" : "mean_norm"; }

inline Granularity granularity_from_string(std::string_view s) {
  if (s == "tensor" || s == "per_tensor") return Granularity::per_tensor;
  if (s == "layer" || s == "per_layer") return Granularity::per_layer;
  if (s == "model" || s == "whole_model") return Granularity::whole_model;
  throw UsageError("unknown granularity '" + std::string(s) + "' (expected tensor, layer or model)");
}

inline Rescale rescale_from_string(std::string_view s) {
  if (s == "none") return Rescale::none;
  if (s == "mean-norm" || s == "mean_norm") return Rescale::mean_norm;
  throw UsageError("unknown rescale policy '" + std::string(s) + "' (expected none or mean-norm)");
}

struct MergeConfig {
  Granularity granularity = Granularity::per_tensor;
  Rescale rescale = Rescale::none;
  /// Sum the normalized weights instead of averaging them. Off by default;
  /// only for reproducing the literal plain-sum reading of the merge rule.
  bool sum_instead_of_mean = false;
};

/// Normalization group a tensor belongs to under `g`.
inline std::string group_of(const std::string& tensor_name, Granularity g) {
  switch (g) {
    case Granularity::per_tensor: return tensor_name;
    case Granularity::per_layer: {
      const auto dot = tensor_name.rfind('.');
      return dot == std::string::npos ? tensor_name : tensor_name.substr(0, dot);
    }
    case Granularity::whole_model: return "<model>";
  }
  return tensor_name;
}

/// L1 norm of every normalization group, accumulated in double.
inline std::map<std::string, double> group_norms(const WeightMap& weights, Granularity g) {
  std::map<std::string, double> norms;
  for (const auto& [name, tensor] : weights) norms[group_of(name, g)] += l1_norm(tensor);
  return norms;
}

/// Divides every tensor by the L1 norm of its group. Metadata is preserved.
inline Checkpoint l1_normalize(const Checkpoint& ckpt, const MergeConfig& cfg = {}) {
  const auto norms = group_norms(ckpt.weights, cfg.granularity);
  for (const auto& [group, norm] : norms) {
    if (!(norm > 0.0)) {
      throw DegenerateWeightsError("normalization group '" + group + "' has zero L1 norm");
    }
  }
  Checkpoint out = ckpt;
  for (auto& [name, tensor] : out.weights) {
    const double norm = norms.at(group_of(name, cfg.granularity));
    for (double& v : tensor.values()) v /= norm;
  }
  return out;
}

struct MergeInput {
  std::string id;
  std::vector<std::string> languages;
  std::uint64_t merge_count = 1;
  std::map<std::string, double> tensor_norms;
};

struct MergeReport {
  std::vector<MergeInput> inputs;  // canonical (id-sorted) order
  std::uint64_t merge_count = 0;
  MergeConfig config;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config"] = {{"granularity", std::string(to_string(config.granularity))},
                   {"rescale", std::string(to_string(config.rescale))},
                   {"sum_instead_of_mean", config.sum_instead_of_mean},
                   {"accumulation", "f64"}};
    j["merge_count"] = merge_count;
    j["inputs"] = nlohmann::json::array();
    for (const auto& in : inputs) {
      j["inputs"].push_back({{"id", in.id},
                             {"languages", in.languages},
                             {"merge_count", in.merge_count},
                             {"l1_norms", in.tensor_norms}});
    }
    return j;
  }
};

struct MergeResult {
  Checkpoint merged;
  MergeReport report;
};

namespace detail {

inline void require_same_architecture(const std::vector<const Checkpoint*>& ckpts) {
  const std::string expected = ckpts.front()->arch_hash();
  std::string offenders;
  for (std::size_t i = 1; i < ckpts.size(); ++i) {
    const std::string h = ckpts[i]->arch_hash();
    if (h != expected) {
      std::string langs;
      for (const auto& l : ckpts[i]->languages) langs += (langs.empty() ? "" : "+") + l;
      offenders += "\n  input " + std::to_string(i) + " (" + langs + ") has architecture " + h;
    }
  }
  if (!offenders.empty()) {
    throw CompatibilityError("cannot merge checkpoints with different architectures; input 0 has " +
                             expected + offenders);
  }
}

/// Weighted sum of the inputs' contributions in the given order. A fresh
/// model (merge_count 1) contributes its L1-normalized weights; a merged
/// model already holds the mean of `n` normalized models and contributes
/// n times its weights (or its weights unchanged in sum mode).
inline Checkpoint combine(const std::vector<const Checkpoint*>& ordered, const MergeConfig& cfg) {
  if (cfg.rescale == Rescale::mean_norm) {
    for (const auto* c : ordered) {
      if (c->merge_count != 1) {
        throw UsageError("mean-norm rescaling needs freshly trained inputs; an input already "
                         "merges " + std::to_string(c->merge_count) + " models");
      }
    }
  }
  Checkpoint out;
  out.spec = ordered.front()->spec;
  out.seed = ordered.front()->seed;
  out.merge_count = 0;
  for (const auto& [name, tensor] : ordered.front()->weights) {
    out.weights.emplace(name, Tensor<double>(tensor.shape()));
  }
  std::map<std::string, double> norm_sums;
  for (const auto* c : ordered) {
    out.languages.insert(c->languages.begin(), c->languages.end());
    out.merge_count += c->merge_count;
    const Checkpoint contribution = c->merge_count == 1 ? l1_normalize(*c, cfg) : *c;
    const double weight = (c->merge_count == 1 || cfg.sum_instead_of_mean)
                              ? 1.0
                              : static_cast<double>(c->merge_count);
    for (auto& [name, acc] : out.weights) {
      const auto& src = contribution.weights.at(name).values();
      auto& dst = acc.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += weight * src[k];
    }
    if (cfg.rescale == Rescale::mean_norm) {
      for (const auto& [group, norm] : group_norms(c->weights, cfg.granularity)) norm_sums[group] += norm;
    }
  }
  const double divisor = cfg.sum_instead_of_mean ? 1.0 : static_cast<double>(out.merge_count);
  for (auto& [name, acc] : out.weights) {
    double scale = 1.0 / divisor;
    if (cfg.rescale == Rescale::mean_norm) {
      scale *= norm_sums.at(group_of(name, cfg.granularity)) / static_cast<double>(ordered.size());
    }
    for (double& v : acc.values()) v = v * scale;
  }
  return out;
}

inline MergeInput describe(const Checkpoint& c, std::string id) {
  MergeInput in;
  in.id = std::move(id);
  in.languages.assign(c.languages.begin(), c.languages.end());
  in.merge_count = c.merge_count;
  for (const auto& [name, tensor] : c.weights) in.tensor_norms[name] = l1_norm(tensor);
  return in;
}

}  // namespace detail

/// In-hand merge: averages the L1-normalized weights of every input. Inputs
/// are accumulated in f64 in order of their content id, so the result does
/// not depend on the order they are passed in.
inline MergeResult collm_merge(const std::vector<Checkpoint>& ckpts, const MergeConfig& cfg = {}) {
  if (ckpts.empty()) throw UsageError("merge needs at least one checkpoint");
  std::vector<const Checkpoint*> inputs;
  for (const auto& c : ckpts) inputs.push_back(&c);
  detail::require_same_architecture(inputs);

  std::vector<std::pair<std::string, const Checkpoint*>> keyed;
  for (const auto* c : inputs) keyed.emplace_back(checkpoint_id(*c), c);
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<const Checkpoint*> ordered;
  for (const auto& [id, c] : keyed) ordered.push_back(c);

  MergeResult result;
  result.merged = detail::combine(ordered, cfg);
  result.report.config = cfg;
  result.report.merge_count = result.merged.merge_count;
  for (const auto& [id, c] : keyed) result.report.inputs.push_back(detail::describe(*c, id));
  return result;
}

/// Plug-in merge: folds one more model into an existing merged model,
/// W' = (n W + m W_new) / (n + m) where n, m are the merge counts and
/// W_new is normalized when it is a single fresh model.
inline MergeResult plugin_merge(const Checkpoint& base, const Checkpoint& incoming,
                                const MergeConfig& cfg = {}) {
  std::vector<const Checkpoint*> ordered{&base, &incoming};
  detail::require_same_architecture(ordered);
  if (cfg.rescale == Rescale::mean_norm && base.merge_count > 1) {
    throw UsageError("plug-in merging does not support mean-norm rescaling of a merged base");
  }
  MergeResult result;
  result.merged = detail::combine(ordered, cfg);
  result.report.config = cfg;
  result.report.merge_count = result.merged.merge_count;
  result.report.inputs.push_back(detail::describe(base, checkpoint_id(base)));
  result.report.inputs.push_back(detail::describe(incoming, checkpoint_id(incoming)));
  return result;
}

}  // namespace collm
