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

#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <utility>

#include <json.hpp>

#include "collm/arch.hpp"
#include "collm/binary_io.hpp"
#include "collm/errors.hpp"
#include "collm/network.hpp"
#include "collm/sha256.hpp"

namespace collm {

/// A trained (or merged) model: its architecture, the named weight tensors
/// and merge metadata. Weights are held in double in memory so merge
/// arithmetic is not rounded between steps; ACKP files store f32.
struct Checkpoint {
  ArchitectureSpec spec;
  WeightMap weights;
  std::set<std::string> languages;
  std::uint64_t merge_count = 1;
  std::uint64_t seed = 0;

  std::string arch_hash() const { return spec.hash(); }
};

/// Throws CompatibilityError unless `ckpt.weights` has exactly the tensor
/// names and shapes the architecture instantiates.
inline void validate_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.languages.empty()) throw DataError("checkpoint has no language tags");
  if (ckpt.merge_count < 1) throw DataError("checkpoint merge_count must be at least 1");
  Network<float> probe(ckpt.spec);
  for (const auto& p : probe.parameters()) {
    auto it = ckpt.weights.find(p.name);
    if (it == ckpt.weights.end()) throw CompatibilityError("checkpoint lacks tensor '" + p.name + "'");
    if (it->second.shape() != p.param->value.shape()) {
      throw CompatibilityError("tensor '" + p.name + "' has shape " + shape_string(it->second.shape()) +
                               ", architecture needs " + shape_string(p.param->value.shape()));
    }
  }
  if (ckpt.weights.size() != probe.parameters().size()) {
    throw CompatibilityError("checkpoint carries tensors the architecture does not define");
  }
}

inline Checkpoint checkpoint_from_network(Network<float>& net, std::set<std::string> languages,
                                          std::uint64_t seed) {
  return {net.spec(), net.export_weights(), std::move(languages), 1, seed};
}

template <typename T>
Network<T> network_from_checkpoint(const Checkpoint& ckpt) {
  Network<T> net(ckpt.spec);
  net.import_weights(ckpt.weights);
  return net;
}

inline constexpr char kAckpMagic[4] = {'A', 'C', 'K', 'P'};
inline constexpr std::uint8_t kAckpVersion = 1;

inline nlohmann::json ackp_header(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["spec"] = ckpt.spec.to_json();
  header["arch_hash"] = ckpt.arch_hash();
  header["languages"] = nlohmann::json::array();
  for (const auto& lang : ckpt.languages) header["languages"].push_back(lang);
  header["merge_count"] = ckpt.merge_count;
  header["seed"] = ckpt.seed;
  return header;
}

/// ACKP layout: "ACKP", u8 version, u32 header length, canonical JSON header,
/// then per tensor in name order: u16 name length, name, u8 ndim,
/// ndim x u32 dims, f32 payload. All integers little-endian.
inline Bytes encode_ackp(const Checkpoint& ckpt) {
  validate_checkpoint(ckpt);
  ByteWriter w;
  w.raw(std::string_view(kAckpMagic, 4));
  w.u8(kAckpVersion);
  const std::string header = ackp_header(ckpt).dump();
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.raw(header);
  for (const auto& [name, tensor] : ckpt.weights) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("tensor name too long: " + name);
    }
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : tensor.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

inline Checkpoint decode_ackp(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4, "magic") != std::string_view(kAckpMagic, 4)) {
    throw ParseError("not an ACKP checkpoint (bad magic)", 0);
  }
  const std::uint8_t version = r.u8("version");
  if (version != kAckpVersion) {
    throw ParseError("unsupported ACKP version " + std::to_string(version), 4);
  }
  const std::uint32_t header_len = r.u32("header length");
  const std::size_t header_at = r.offset();
  const std::string header_text = r.str(header_len, "header");

  Checkpoint ckpt;
  std::string stored_hash;
  try {
    const auto header = nlohmann::json::parse(header_text);
    ckpt.spec = architecture_from_json(header.at("spec"));
    stored_hash = header.at("arch_hash").get<std::string>();
    for (const auto& lang : header.at("languages")) ckpt.languages.insert(lang.get<std::string>());
    ckpt.merge_count = header.at("merge_count").get<std::uint64_t>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed ACKP header: ") + e.what(), header_at);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid architecture in ACKP header: ") + e.what(), header_at);
  }
  if (stored_hash != ckpt.arch_hash()) {
    throw ParseError("ACKP arch_hash does not match its embedded spec", header_at);
  }

  Network<float> probe(ckpt.spec);
  for (const auto& p : probe.parameters()) {
    const std::size_t at = r.offset();
    const std::uint16_t name_len = r.u16("tensor name length");
    const std::string name = r.str(name_len, "tensor name");
    if (name != p.name) {
      throw ParseError("expected tensor '" + p.name + "', found '" + name + "'", at);
    }
    const std::uint8_t ndim = r.u8("tensor rank");
    Shape shape;
    for (std::uint8_t i = 0; i < ndim; ++i) shape.push_back(r.u32("tensor dimension"));
    if (shape != p.param->value.shape()) {
      throw ParseError("tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                           shape_string(p.param->value.shape()),
                       at);
    }
    const std::size_t count = shape_numel(shape);
    r.need(4 * count, "tensor payload");
    std::vector<double> values(count);
    for (auto& v : values) v = r.f32("tensor payload");
    ckpt.weights.emplace(name, Tensor<double>(shape, std::move(values)));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after last tensor", r.offset());
  if (ckpt.languages.empty()) throw ParseError("ACKP header lists no languages", header_at);
  if (ckpt.merge_count < 1) throw ParseError("ACKP merge_count must be at least 1", header_at);
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_ackp(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_ackp(bytes);
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

/// Content identity: SHA-256 of the ACKP encoding.
inline std::string checkpoint_id(const Checkpoint& ckpt) { return sha256_hex(encode_ackp(ckpt)); }

}  // namespace collm
