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
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "collm/dataset.hpp"
#include "collm/errors.hpp"
#include "collm/ptm.hpp"
#include "collm/rng.hpp"

namespace collm {

enum class SynthMode {
  shared,    // one global class-mean pair, per-language offset added to both classes
  disjoint,  // independent class-mean pair per language
};

inline SynthMode synth_mode_from_string(std::string_view s) {
  if (s == "shared") return SynthMode::shared;
  if (s == "disjoint") return SynthMode::disjoint;
  throw ConfigError("unknown synth mode '" + std::string(s) + "' (expected shared or disjoint)");
}

struct SynthConfig {
  std::size_t n_languages = 4;
  std::size_t dim = 64;
  std::size_t train_count = 480;
  std::size_t test_count = 120;
  SynthMode mode = SynthMode::shared;
  double separation = 6.0;    // distance between the two class means
  double offset_scale = 1.0;  // per-coordinate std of the language nuisance offset
  std::uint64_t seed = 7;
  std::string ptm = "synthetic";

  void validate() const {
    if (n_languages == 0) throw ConfigError("synth: need at least one language");
    if (dim == 0) throw ConfigError("synth: dim must be positive");
    if (train_count == 0 || test_count == 0) throw ConfigError("synth: counts must be positive");
    if (!(separation > 0.0)) throw ConfigError("synth: separation must be positive");
    if (!(offset_scale >= 0.0)) throw ConfigError("synth: offset scale must be non-negative");
    make_ptm(ptm, dim);
  }
};

/// Generated data for one language plus the class means it was drawn from.
struct SynthLanguage {
  std::string language;
  std::vector<double> mean0;
  std::vector<double> mean1;
  EmbeddingDataset train;
  EmbeddingDataset test;
};

inline std::string synth_language_name(std::size_t index) { return "lang" + std::to_string(index + 1); }

namespace detail {

inline std::vector<double> unit_direction(std::size_t dim, Rng& rng) {
  std::vector<double> u(dim);
  double norm = 0.0;
  for (auto& x : u) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : u) x /= norm;
  return u;
}

inline EmbeddingDataset draw_partition(const std::string& language, const PtmInfo& ptm,
                                       const char* partition, std::size_t count,
                                       const std::vector<double>& mean0,
                                       const std::vector<double>& mean1, Rng& rng) {
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = i < count / 2 ? 0 : 1;
  rng.shuffle(labels);
  EmbeddingDataset ds{language, ptm, {}};
  ds.records.reserve(count);
  char id[64];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(id, sizeof id, "%s_%s_%05zu", language.c_str(), partition, i);
    const auto& mean = labels[i] == 0 ? mean0 : mean1;
    std::vector<float> v(mean.size());
    for (std::size_t k = 0; k < mean.size(); ++k) v[k] = static_cast<float>(mean[k] + rng.normal());
    ds.records.push_back({id, labels[i], std::move(v)});
  }
  return ds;
}

}  // namespace detail

/// Gaussian two-class embeddings for several languages with unit-variance
/// spherical noise. In shared mode every language uses the same
/// discriminative direction, so models transfer across languages; in disjoint
/// mode each language draws its own, so they do not.
inline std::vector<SynthLanguage> synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const PtmInfo ptm = make_ptm(cfg.ptm, cfg.dim);
  const Rng master(cfg.seed);
  Rng global = master.fork(0);
  const std::vector<double> shared_dir = detail::unit_direction(cfg.dim, global);

  std::vector<SynthLanguage> out;
  for (std::size_t l = 0; l < cfg.n_languages; ++l) {
    Rng lang_rng = master.fork(1 + l);
    const std::vector<double> dir =
        cfg.mode == SynthMode::shared ? shared_dir : detail::unit_direction(cfg.dim, lang_rng);
    std::vector<double> offset(cfg.dim);
    for (auto& o : offset) o = cfg.offset_scale * lang_rng.normal();

    SynthLanguage lang;
    lang.language = synth_language_name(l);
    lang.mean0.resize(cfg.dim);
    lang.mean1.resize(cfg.dim);
    for (std::size_t k = 0; k < cfg.dim; ++k) {
      lang.mean0[k] = offset[k] - 0.5 * cfg.separation * dir[k];
      lang.mean1[k] = offset[k] + 0.5 * cfg.separation * dir[k];
    }
    Rng train_rng = master.fork(1000 + 2 * l);
    Rng test_rng = master.fork(1001 + 2 * l);
    lang.train = detail::draw_partition(lang.language, ptm, "train", cfg.train_count, lang.mean0,
                                        lang.mean1, train_rng);
    lang.test = detail::draw_partition(lang.language, ptm, "test", cfg.test_count, lang.mean0,
                                       lang.mean1, test_rng);
    out.push_back(std::move(lang));
  }
  return out;
}

}  // namespace collm
