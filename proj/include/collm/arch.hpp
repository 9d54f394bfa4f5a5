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
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "collm/errors.hpp"
#include "collm/layer_spec.hpp"
#include "collm/ptm.hpp"
#include "collm/sha256.hpp"
#include "collm/tensor.hpp"

namespace collm {

enum class BlockKind { conv, transformer, linear };

inline std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::conv: return "conv";
    case BlockKind::transformer: return "transformer";
    case BlockKind::linear: return "linear";
  }
  return "?";
}

inline BlockKind block_kind_from_string(std::string_view name) {
  if (name == "conv" || name == "cnn") return BlockKind::conv;
  if (name == "transformer") return BlockKind::transformer;
  if (name == "linear") return BlockKind::linear;
  throw ConfigError("unknown block kind '" + std::string(name) + "'");
}

/// Hyperparameters shared by every builder. Defaults are the downstream
/// classifier recipe; changing any of them changes the architecture hash.
struct ArchOptions {
  std::size_t conv1_channels = 32;
  std::size_t conv2_channels = 64;
  std::size_t kernel = 3;
  std::size_t pool_window = 2;
  std::size_t pool_stride = 2;
  std::vector<std::size_t> fcn_units{256, 90, 56};
  /// Dropout follows the first two hidden FCN layers.
  double dropout = 0.2;
  std::size_t heads = 8;
  std::size_t ffn_hidden = 128;
  double layernorm_eps = 1e-5;
  std::size_t classes = 2;
};

/// Canonical topology: one layer list per input stream, then a shared head
/// that consumes the concatenated stream outputs and ends in softmax_head.
struct ArchitectureSpec {
  BlockKind block = BlockKind::conv;
  std::vector<PtmInfo> inputs;
  std::vector<std::vector<LayerSpec>> streams;
  std::vector<LayerSpec> head;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["block"] = std::string(to_string(block));
    j["inputs"] = nlohmann::json::array();
    for (const auto& in : inputs) j["inputs"].push_back({{"ptm", in.name}, {"dim", in.dim}});
    j["streams"] = nlohmann::json::array();
    for (const auto& stream : streams) {
      nlohmann::json layers = nlohmann::json::array();
      for (const auto& layer : stream) layers.push_back(to_json_value(layer));
      j["streams"].push_back(std::move(layers));
    }
    j["head"] = nlohmann::json::array();
    for (const auto& layer : head) j["head"].push_back(to_json_value(layer));
    return j;
  }

  /// Compact JSON with lexicographically sorted keys.
  std::string canonical() const { return to_json().dump(); }

  std::string hash() const { return sha256_hex(canonical()); }

  std::size_t num_classes() const {
    for (auto it = head.rbegin(); it != head.rend(); ++it) {
      if (it->kind == LayerKind::dense) return it->units;
    }
    return 0;
  }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Shape of a stream's input tensor for an embedding of width `dim`.
inline Shape stream_input_shape(const std::vector<LayerSpec>& stream, std::size_t dim) {
  if (!stream.empty() && stream.front().kind == LayerKind::conv1d) return {1, dim};
  return {dim};
}

/// Propagates a shape through a layer list; throws ConfigError on any
/// mismatch (kernel longer than the sequence, wrong widths, ...).
inline Shape infer_output_shape(const std::vector<LayerSpec>& layers, Shape shape) {
  auto fail = [](const LayerSpec& l, const Shape& s, const std::string& why) {
    throw ConfigError(std::string(to_string(l.kind)) + " cannot accept input " + shape_string(s) +
                      ": " + why);
  };
  for (const auto& l : layers) {
    l.validate();
    switch (l.kind) {
      case LayerKind::conv1d:
        if (shape.size() != 2 || shape[0] != l.in_channels) fail(l, shape, "channel mismatch");
        if (shape[1] < l.kernel) fail(l, shape, "sequence shorter than kernel");
        shape = {l.out_channels, shape[1] - l.kernel + 1};
        break;
      case LayerKind::maxpool1d:
        if (shape.size() != 2) fail(l, shape, "expected [C x L]");
        if (shape[1] < l.window) fail(l, shape, "sequence shorter than pool window");
        shape = {shape[0], (shape[1] - l.window) / l.stride + 1};
        break;
      case LayerKind::dense:
        if (shape.size() != 1 || shape[0] != l.in_features) fail(l, shape, "width mismatch");
        shape = {l.units};
        break;
      case LayerKind::layernorm:
        if (shape.back() != l.width) fail(l, shape, "width mismatch");
        break;
      case LayerKind::multihead_attention:
      case LayerKind::ffn:
        if (shape.size() != 2 || shape[1] != l.width) fail(l, shape, "expected [T x width]");
        break;
      case LayerKind::transpose:
        if (shape.size() != 2) fail(l, shape, "expected rank 2");
        shape = {shape[1], shape[0]};
        break;
      case LayerKind::global_avg_pool:
        if (shape.size() != 2) fail(l, shape, "expected [T x d]");
        shape = {shape[1]};
        break;
      case LayerKind::flatten:
        shape = {shape_numel(shape)};
        break;
      case LayerKind::relu:
      case LayerKind::dropout:
      case LayerKind::softmax_head:
        break;
    }
  }
  return shape;
}

/// Checks the whole architecture and returns the per-stream output widths.
inline std::vector<std::size_t> validate(const ArchitectureSpec& spec) {
  if (spec.inputs.empty() || spec.inputs.size() > 2) {
    throw ConfigError("architecture needs one or two inputs, got " +
                      std::to_string(spec.inputs.size()));
  }
  if (spec.streams.size() != spec.inputs.size()) {
    throw ConfigError("architecture has " + std::to_string(spec.inputs.size()) + " inputs but " +
                      std::to_string(spec.streams.size()) + " streams");
  }
  std::vector<std::size_t> widths;
  for (std::size_t s = 0; s < spec.streams.size(); ++s) {
    for (const auto& layer : spec.streams[s]) {
      if (layer.kind == LayerKind::softmax_head) throw ConfigError("softmax_head inside a stream");
    }
    const Shape out =
        infer_output_shape(spec.streams[s], stream_input_shape(spec.streams[s], spec.inputs[s].dim));
    if (out.size() != 1) {
      throw ConfigError("stream " + std::to_string(s) + " ends with shape " + shape_string(out) +
                        "; it must end in a vector");
    }
    widths.push_back(out[0]);
  }
  if (spec.head.empty() || spec.head.back().kind != LayerKind::softmax_head) {
    throw ConfigError("head must end with softmax_head");
  }
  for (std::size_t i = 0; i + 1 < spec.head.size(); ++i) {
    if (spec.head[i].kind == LayerKind::softmax_head) throw ConfigError("softmax_head must be last");
  }
  std::size_t concat = 0;
  for (std::size_t w : widths) concat += w;
  const Shape logits = infer_output_shape(spec.head, {concat});
  if (logits.size() != 1 || logits[0] < 2) {
    throw ConfigError("head must produce at least two logits, got " + shape_string(logits));
  }
  return widths;
}

namespace detail {

inline std::vector<LayerSpec> conv_block(std::size_t in_channels, const ArchOptions& o) {
  return {
      LayerSpec::conv1d(in_channels, o.conv1_channels, o.kernel),
      LayerSpec::simple(LayerKind::relu),
      LayerSpec::maxpool1d(o.pool_window, o.pool_stride),
      LayerSpec::conv1d(o.conv1_channels, o.conv2_channels, o.kernel),
      LayerSpec::simple(LayerKind::relu),
      LayerSpec::maxpool1d(o.pool_window, o.pool_stride),
  };
}

inline std::vector<LayerSpec> stream_for(BlockKind block, const ArchOptions& o) {
  std::vector<LayerSpec> layers;
  switch (block) {
    case BlockKind::conv:
      layers = conv_block(1, o);
      layers.push_back(LayerSpec::simple(LayerKind::flatten));
      break;
    case BlockKind::transformer:
      layers = conv_block(1, o);
      layers.push_back(LayerSpec::simple(LayerKind::transpose));
      layers.push_back(LayerSpec::attention(o.conv2_channels, o.heads));
      layers.push_back(LayerSpec::layernorm(o.conv2_channels, o.layernorm_eps));
      layers.push_back(LayerSpec::ffn(o.conv2_channels, o.ffn_hidden));
      layers.push_back(LayerSpec::layernorm(o.conv2_channels, o.layernorm_eps));
      layers.push_back(LayerSpec::simple(LayerKind::global_avg_pool));
      break;
    case BlockKind::linear:
      break;
  }
  return layers;
}

inline std::vector<LayerSpec> fcn_head(std::size_t in_width, const ArchOptions& o) {
  std::vector<LayerSpec> head;
  std::size_t width = in_width;
  for (std::size_t i = 0; i < o.fcn_units.size(); ++i) {
    head.push_back(LayerSpec::dense(width, o.fcn_units[i]));
    head.push_back(LayerSpec::simple(LayerKind::relu));
    if (i + 1 < o.fcn_units.size()) head.push_back(LayerSpec::dropout(o.dropout));
    width = o.fcn_units[i];
  }
  head.push_back(LayerSpec::dense(width, o.classes));
  head.push_back(LayerSpec::simple(LayerKind::softmax_head));
  return head;
}

inline ArchitectureSpec assemble(BlockKind block, std::vector<PtmInfo> inputs, const ArchOptions& o) {
  ArchitectureSpec spec;
  spec.block = block;
  spec.inputs = std::move(inputs);
  std::size_t concat = 0;
  for (const auto& in : spec.inputs) {
    if (in.dim < 16) {
      throw ConfigError("embedding dimension " + std::to_string(in.dim) +
                        " is too small for two conv+pool stages (need at least 16)");
    }
    auto stream = stream_for(block, o);
    concat += infer_output_shape(stream, stream_input_shape(stream, in.dim))[0];
    spec.streams.push_back(std::move(stream));
  }
  spec.head = fcn_head(concat, o);
  validate(spec);
  return spec;
}

}  // namespace detail

/// Conv block (conv 32 -> relu -> pool -> conv 64 -> relu -> pool) -> flatten -> FCN head.
inline ArchitectureSpec build_cnn(const PtmInfo& input, const ArchOptions& options = {}) {
  return detail::assemble(BlockKind::conv, {input}, options);
}

inline ArchitectureSpec build_cnn(std::size_t dim, const ArchOptions& options = {}) {
  return build_cnn(make_ptm("embedding", dim), options);
}

/// Conv block -> one post-norm encoder block -> global average pool -> FCN head.
inline ArchitectureSpec build_transformer(const PtmInfo& input, const ArchOptions& options = {}) {
  if (options.conv2_channels % options.heads != 0) {
    throw ConfigError("model width " + std::to_string(options.conv2_channels) +
                      " is not divisible by " + std::to_string(options.heads) + " heads");
  }
  return detail::assemble(BlockKind::transformer, {input}, options);
}

inline ArchitectureSpec build_transformer(std::size_t dim, const ArchOptions& options = {}) {
  return build_transformer(make_ptm("embedding", dim), options);
}

/// Two streams of the same block kind, one per representation, joined before the head.
inline ArchitectureSpec build_fusion(const PtmInfo& a, const PtmInfo& b, BlockKind block,
                                     const ArchOptions& options = {}) {
  if (a.name == b.name) {
    throw ConfigError("fusion needs two different representations, got '" + a.name + "' twice");
  }
  if (block == BlockKind::linear) throw ConfigError("fusion streams must be conv or transformer");
  if (block == BlockKind::transformer && options.conv2_channels % options.heads != 0) {
    throw ConfigError("model width not divisible by head count");
  }
  return detail::assemble(block, {a, b}, options);
}

/// Mixed-kind fusion is never valid; this overload exists so callers that
/// accept per-stream kinds get the same diagnostic everywhere.
inline ArchitectureSpec build_fusion(const PtmInfo& a, BlockKind block_a, const PtmInfo& b,
                                     BlockKind block_b, const ArchOptions& options = {}) {
  if (block_a != block_b) {
    throw ConfigError("fusion streams must use the same block kind (got " +
                      std::string(to_string(block_a)) + " and " + std::string(to_string(block_b)) +
                      "); convolution and transformer blocks are never intermixed");
  }
  return build_fusion(a, b, block_a, options);
}

/// Single affine layer + softmax, with no hidden layers.
inline ArchitectureSpec build_linear(const PtmInfo& input, std::size_t classes = 2) {
  ArchitectureSpec spec;
  spec.block = BlockKind::linear;
  spec.inputs = {input};
  spec.streams = {{}};
  spec.head = {LayerSpec::dense(input.dim, classes), LayerSpec::simple(LayerKind::softmax_head)};
  validate(spec);
  return spec;
}

inline ArchitectureSpec architecture_from_json(const nlohmann::json& j) {
  try {
    ArchitectureSpec spec;
    spec.block = block_kind_from_string(j.at("block").get<std::string>());
    for (const auto& in : j.at("inputs")) {
      spec.inputs.push_back(make_ptm(in.at("ptm").get<std::string>(), in.at("dim").get<std::size_t>()));
    }
    for (const auto& stream : j.at("streams")) {
      std::vector<LayerSpec> layers;
      for (const auto& l : stream) layers.push_back(layer_spec_from_json(l));
      spec.streams.push_back(std::move(layers));
    }
    for (const auto& l : j.at("head")) spec.head.push_back(layer_spec_from_json(l));
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed architecture spec: ") + e.what());
  }
}

}  // namespace collm
