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
#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "collm/binary_io.hpp"
#include "collm/errors.hpp"
#include "collm/ptm.hpp"
#include "collm/rng.hpp"

namespace collm {

inline constexpr std::array<const char*, 2> kLabelNames{"non_abusive", "abusive"};

struct EmbeddingRecord {
  std::string id;
  int label = 0;  // 0 non-abusive, 1 abusive
  std::vector<float> vector;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// Labelled embeddings of one language produced by one encoder.
struct EmbeddingDataset {
  std::string language;
  PtmInfo ptm;
  std::vector<EmbeddingRecord> records;

  std::size_t dim() const noexcept { return ptm.dim; }
  std::size_t size() const noexcept { return records.size(); }

  std::array<std::size_t, 2> class_counts() const {
    std::array<std::size_t, 2> counts{0, 0};
    for (const auto& r : records) ++counts[static_cast<std::size_t>(r.label)];
    return counts;
  }

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

/// Throws DataError on a dimension, label or id-uniqueness violation.
inline void validate_dataset(const EmbeddingDataset& ds) {
  if (ds.ptm.dim == 0) throw DataError("dataset dimension must be positive");
  if (ds.language.empty()) throw DataError("dataset language tag is empty");
  std::unordered_set<std::string> seen;
  for (const auto& r : ds.records) {
    if (r.vector.size() != ds.ptm.dim) {
      throw DataError("record '" + r.id + "' has " + std::to_string(r.vector.size()) +
                      " values, dataset dimension is " + std::to_string(ds.ptm.dim));
    }
    if (r.label != 0 && r.label != 1) {
      throw DataError("record '" + r.id + "' has label " + std::to_string(r.label) +
                      "; labels must be 0 or 1");
    }
    if (r.id.empty() || r.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("record id must be 1..65535 bytes");
    }
    if (!seen.insert(r.id).second) throw DataError("duplicate record id '" + r.id + "'");
  }
}

inline constexpr char kAembMagic[4] = {'A', 'E', 'M', 'B'};
inline constexpr std::uint8_t kAembVersion = 1;

/// AEMB layout: "AEMB", u8 version, u32 header length, canonical JSON header
/// {count, dim, label_names, language, ptm}, then per record: u16 id length,
/// id, u8 label, dim x f32. All integers little-endian.
inline Bytes encode_aemb(const EmbeddingDataset& ds) {
  validate_dataset(ds);
  nlohmann::json header;
  header["language"] = ds.language;
  header["ptm"] = ds.ptm.name;
  header["dim"] = ds.ptm.dim;
  header["count"] = ds.records.size();
  header["label_names"] = {kLabelNames[0], kLabelNames[1]};
  const std::string text = header.dump();

  ByteWriter w;
  w.raw(std::string_view(kAembMagic, 4));
  w.u8(kAembVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  for (const auto& r : ds.records) {
    w.u16(static_cast<std::uint16_t>(r.id.size()));
    w.raw(r.id);
    w.u8(static_cast<std::uint8_t>(r.label));
    for (float v : r.vector) w.f32(v);
  }
  return w.take();
}

inline EmbeddingDataset decode_aemb(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4, "magic") != std::string_view(kAembMagic, 4)) {
    throw ParseError("not an AEMB file (bad magic)", 0);
  }
  const std::uint8_t version = r.u8("version");
  if (version != kAembVersion) throw ParseError("unsupported AEMB version " + std::to_string(version), 4);
  const std::uint32_t header_len = r.u32("header length");
  const std::size_t header_at = r.offset();
  const std::string header_text = r.str(header_len, "header");

  EmbeddingDataset ds;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(header_text);
    ds.language = header.at("language").get<std::string>();
    ds.ptm = make_ptm(header.at("ptm").get<std::string>(), header.at("dim").get<std::size_t>());
    count = header.at("count").get<std::size_t>();
    const auto names = header.at("label_names").get<std::vector<std::string>>();
    if (names.size() != 2 || names[0] != kLabelNames[0] || names[1] != kLabelNames[1]) {
      throw ParseError("AEMB label_names must be [\"non_abusive\",\"abusive\"]", header_at);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed AEMB header: ") + e.what(), header_at);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid AEMB header: ") + e.what(), header_at);
  }
  if (ds.language.empty()) throw ParseError("AEMB header has an empty language", header_at);

  const std::size_t dim = ds.ptm.dim;
  // Each record needs at least 2 + 1 + 1 + 4*dim bytes; reject absurd counts early.
  if (count > r.remaining() / (4 + 4 * dim)) {
    throw ParseError("truncated input: header declares " + std::to_string(count) +
                         " records but only " + std::to_string(r.remaining()) + " bytes follow",
                     r.offset());
  }
  ds.records.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    EmbeddingRecord rec;
    const std::uint16_t id_len = r.u16("record id length");
    if (id_len == 0) throw ParseError("empty record id", at);
    rec.id = r.str(id_len, "record id");
    const std::uint8_t label = r.u8("record label");
    if (label > 1) throw ParseError("record '" + rec.id + "' has label " + std::to_string(label), at);
    rec.label = label;
    r.need(4 * dim, "record vector");
    rec.vector.resize(dim);
    for (auto& v : rec.vector) v = r.f32("record vector");
    if (!seen.insert(rec.id).second) throw ParseError("duplicate record id '" + rec.id + "'", at);
    ds.records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after last record", r.offset());
  return ds;
}

inline void write_embeddings(const EmbeddingDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, encode_aemb(ds));
}

inline EmbeddingDataset read_embeddings(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_aemb(bytes);
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

/// Official train/test partition of one language.
struct SplitManifest {
  std::string language;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
};

/// Reads {language, train_path, test_path}; relative paths resolve against
/// the manifest's directory.
inline SplitManifest read_manifest(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    SplitManifest m;
    m.language = j.at("language").get<std::string>();
    m.train_path = j.at("train_path").get<std::string>();
    m.test_path = j.at("test_path").get<std::string>();
    const auto base = path.parent_path();
    if (m.train_path.is_relative()) m.train_path = base / m.train_path;
    if (m.test_path.is_relative()) m.test_path = base / m.test_path;
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest '" + path.string() + "': " + e.what());
  }
}

inline void write_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  nlohmann::json j{{"language", m.language},
                   {"train_path", m.train_path.string()},
                   {"test_path", m.test_path.string()}};
  write_file_atomic(path, j.dump(2) + "\n");
}

/// Loads both partitions and checks they belong to the manifest's language
/// and share no sample id.
inline std::pair<EmbeddingDataset, EmbeddingDataset> load_split(const SplitManifest& m) {
  EmbeddingDataset train = read_embeddings(m.train_path);
  EmbeddingDataset test = read_embeddings(m.test_path);
  for (const auto* ds : {&train, &test}) {
    if (ds->language != m.language) {
      throw DataError("manifest language '" + m.language + "' but file holds '" + ds->language + "'");
    }
  }
  if (train.ptm != test.ptm) throw DataError("train and test partitions use different encoders");
  std::unordered_set<std::string> train_ids;
  for (const auto& r : train.records) train_ids.insert(r.id);
  for (const auto& r : test.records) {
    if (train_ids.count(r.id)) throw DataError("sample '" + r.id + "' is in both train and test");
  }
  return {std::move(train), std::move(test)};
}

/// Two encoders' embeddings of the same utterances.
struct PairedRecord {
  std::string id;
  int label = 0;
  std::vector<float> first;
  std::vector<float> second;
};

struct PairedDataset {
  std::string language;
  PtmInfo first_ptm;
  PtmInfo second_ptm;
  std::vector<PairedRecord> records;
};

/// Aligns two datasets by sample id (in `a`'s order). Ids must match
/// exactly and labels must agree.
inline PairedDataset join_for_fusion(const EmbeddingDataset& a, const EmbeddingDataset& b) {
  if (a.language != b.language) {
    throw DataError("cannot pair languages '" + a.language + "' and '" + b.language + "'");
  }
  std::unordered_map<std::string, const EmbeddingRecord*> by_id;
  for (const auto& r : b.records) by_id.emplace(r.id, &r);

  std::vector<std::string> only_a, conflicts;
  PairedDataset out{a.language, a.ptm, b.ptm, {}};
  out.records.reserve(a.records.size());
  for (const auto& r : a.records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) {
      only_a.push_back(r.id);
      continue;
    }
    if (it->second->label != r.label) {
      conflicts.push_back(r.id);
      continue;
    }
    out.records.push_back({r.id, r.label, r.vector, it->second->vector});
    by_id.erase(it);
  }
  auto list = [](const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size() && i < 5; ++i) s += (i ? ", " : "") + ids[i];
    if (ids.size() > 5) s += ", ...";
    return s;
  };
  if (!conflicts.empty()) throw DataError("label disagreement for id(s): " + list(conflicts));
  if (!only_a.empty()) throw DataError("id(s) missing from second dataset: " + list(only_a));
  if (!by_id.empty()) {
    std::vector<std::string> only_b;
    for (const auto& r : b.records) {
      if (by_id.count(r.id)) only_b.push_back(r.id);
    }
    throw DataError("id(s) missing from first dataset: " + list(only_b));
  }
  return out;
}

/// Splits indices 0..labels.size()-1 into (kept, held_out) so that each class
/// contributes round(fraction * class_size) samples to held_out. Selection
/// within a class is a seeded shuffle; both outputs are sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in [0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> kept, held;
  for (auto& [label, idx] : by_class) {
    rng.shuffle(idx);
    const auto n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    held.insert(held.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_held));
    kept.insert(kept.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_held), idx.end());
  }
  std::sort(kept.begin(), kept.end());
  std::sort(held.begin(), held.end());
  return {std::move(kept), std::move(held)};
}

}  // namespace collm
