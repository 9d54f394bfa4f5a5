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
#include <string>
#include <string_view>

#include "collm/errors.hpp"

namespace collm {

/// Identity of the frozen speech model that produced an embedding.
struct PtmInfo {
  std::string name;
  std::size_t dim = 0;

  friend bool operator==(const PtmInfo&, const PtmInfo&) = default;
};

/// The five speech encoders and their pooled embedding widths.
inline constexpr std::array<std::pair<std::string_view, std::size_t>, 5> kKnownPtms{{
    {"trillsson", 1024},
    {"mms", 1280},
    {"whisper", 512},
    {"wavlm_or_unispeechsat", 768},
    {"xvector", 512},
}};

inline bool is_known_ptm(std::string_view name) {
  for (const auto& [known, dim] : kKnownPtms) {
    if (known == name) return true;
  }
  return false;
}

/// Looks up one of the known encoders; throws ConfigError for anything else.
inline PtmInfo ptm_info(std::string_view name) {
  for (const auto& [known, dim] : kKnownPtms) {
    if (known == name) return {std::string(known), dim};
  }
  throw ConfigError("unknown PTM '" + std::string(name) + "'");
}

/// Any (name, dim) pair. Known names must carry their fixed width; other
/// names (e.g. "synthetic") are accepted with any positive width.
inline PtmInfo make_ptm(std::string_view name, std::size_t dim) {
  if (name.empty()) throw ConfigError("PTM name must not be empty");
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  if (is_known_ptm(name)) {
    const PtmInfo known = ptm_info(name);
    if (known.dim != dim) {
      throw ConfigError("PTM '" + known.name + "' produces " + std::to_string(known.dim) +
                        "-dim embeddings, got " + std::to_string(dim));
    }
    return known;
  }
  return {std::string(name), dim};
}

}  // namespace collm
