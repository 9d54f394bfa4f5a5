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
#include <cstddef>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "collm/checkpoint.hpp"
#include "collm/dataset.hpp"
#include "collm/errors.hpp"
#include "collm/predict.hpp"

namespace collm {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Binary classification summary. confusion[truth][predicted].
struct MetricsReport {
  std::size_t count = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<ClassScores, 2> per_class{};
  std::array<std::array<std::size_t, 2>, 2> confusion{};
};

inline MetricsReport metrics_from_confusion(const std::array<std::array<std::size_t, 2>, 2>& cm) {
  MetricsReport m;
  m.confusion = cm;
  m.count = cm[0][0] + cm[0][1] + cm[1][0] + cm[1][1];
  if (m.count == 0) throw UsageError("metrics over zero samples");
  m.accuracy = static_cast<double>(cm[0][0] + cm[1][1]) / static_cast<double>(m.count);
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t tp = cm[c][c];
    const std::size_t predicted = cm[0][c] + cm[1][c];
    const std::size_t actual = cm[c][0] + cm[c][1];
    auto& s = m.per_class[c];
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    // 2TP / (2TP + FP + FN) equals 2PR/(P+R) and is 0 when TP = 0.
    const std::size_t denom = 2 * tp + (predicted - tp) + (actual - tp);
    s.f1 = denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  m.macro_f1 = 0.5 * (m.per_class[0].f1 + m.per_class[1].f1);
  return m;
}

inline MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw UsageError("metrics: " + std::to_string(truth.size()) + " labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  if (truth.empty()) throw UsageError("metrics over an empty dataset");
  std::array<std::array<std::size_t, 2>, 2> cm{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if ((truth[i] != 0 && truth[i] != 1) || (predicted[i] != 0 && predicted[i] != 1)) {
      throw DataError("metrics: labels must be 0 or 1");
    }
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return metrics_from_confusion(cm);
}

inline MetricsReport evaluate(const Checkpoint& ckpt, const EmbeddingDataset& ds) {
  if (ds.records.empty()) throw UsageError("cannot evaluate on an empty dataset ('" + ds.language + "')");
  if (ckpt.spec.inputs.size() != 1) {
    throw DataError("model takes two embeddings; evaluate it on a paired dataset");
  }
  Predictor<float> predictor(ckpt);
  std::vector<int> truth, pred;
  truth.reserve(ds.size());
  pred.reserve(ds.size());
  for (const auto& r : ds.records) {
    truth.push_back(r.label);
    pred.push_back(predictor.predict(r.vector).label);
  }
  return compute_metrics(truth, pred);
}

inline MetricsReport evaluate(const Checkpoint& ckpt, const PairedDataset& ds) {
  if (ds.records.empty()) throw UsageError("cannot evaluate on an empty dataset ('" + ds.language + "')");
  Predictor<float> predictor(ckpt);
  std::vector<int> truth, pred;
  for (const auto& r : ds.records) {
    const std::vector<float> pair[2] = {r.first, r.second};
    truth.push_back(r.label);
    pred.push_back(predictor.predict(std::span<const std::vector<float>>(pair, 2)).label);
  }
  return compute_metrics(truth, pred);
}

/// Scores for every (model, evaluation language) pair. Row i corresponds to
/// row_labels[i], column j to languages[j].
struct CrossMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> languages;
  std::vector<std::vector<MetricsReport>> cells;

  double accuracy(std::size_t row, std::size_t col) const { return cells[row][col].accuracy; }
  double macro_f1(std::size_t row, std::size_t col) const { return cells[row][col].macro_f1; }

  /// Lowest accuracy in a row, i.e. the model's worst evaluation language.
  double row_min_accuracy(std::size_t row) const {
    double m = 1.0;
    for (const auto& c : cells[row]) m = std::min(m, c.accuracy);
    return m;
  }
};

/// Evaluates each model on each dataset in the given order.
inline CrossMatrix evaluate_grid(const std::vector<std::pair<std::string, Checkpoint>>& models,
                                 const std::vector<std::pair<std::string, EmbeddingDataset>>& datasets) {
  if (models.empty() || datasets.empty()) throw UsageError("evaluation grid needs models and datasets");
  CrossMatrix m;
  for (const auto& [lang, ds] : datasets) m.languages.push_back(lang);
  for (const auto& [label, ckpt] : models) {
    m.row_labels.push_back(label);
    std::vector<MetricsReport> row;
    for (const auto& [lang, ds] : datasets) row.push_back(evaluate(ckpt, ds));
    m.cells.push_back(std::move(row));
  }
  return m;
}

/// Square cross-lingual matrix: rows are training languages, columns
/// evaluation languages, both in the order of `models`.
inline CrossMatrix cross_eval(const std::vector<std::pair<std::string, Checkpoint>>& models,
                              const std::vector<std::pair<std::string, EmbeddingDataset>>& datasets) {
  std::vector<std::pair<std::string, EmbeddingDataset>> ordered;
  for (const auto& [lang, ckpt] : models) {
    auto it = std::find_if(datasets.begin(), datasets.end(),
                           [&](const auto& d) { return d.first == lang; });
    if (it == datasets.end()) throw UsageError("no evaluation data for language '" + lang + "'");
    ordered.push_back(*it);
  }
  for (const auto& [lang, ds] : datasets) {
    auto it = std::find_if(models.begin(), models.end(), [&](const auto& m) { return m.first == lang; });
    if (it == models.end()) throw UsageError("no model trained on language '" + lang + "'");
  }
  return evaluate_grid(models, ordered);
}

enum class ReportFormat { json, csv, markdown };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "md" || s == "markdown") return ReportFormat::markdown;
  throw UsageError("unknown report format '" + std::string(s) + "' (expected json, csv or md)");
}

/// Score in [0,1] as a percentage with two decimals, e.g. 0.8629 -> "86.29".
inline std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value * 100.0);
  return buf;
}

struct NamedReport {
  std::string name;
  MetricsReport metrics;
};

inline std::string render_report(const std::vector<NamedReport>& reports, ReportFormat format) {
  if (reports.empty()) throw UsageError("nothing to report");
  auto score = [](double v) { return format_score(v); };
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json: {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : reports) {
        const auto& m = r.metrics;
        nlohmann::json per_class = nlohmann::json::array();
        for (std::size_t c = 0; c < 2; ++c) {
          per_class.push_back({{"class", kLabelNames[c]},
                               {"precision", std::stod(score(m.per_class[c].precision))},
                               {"recall", std::stod(score(m.per_class[c].recall))},
                               {"f1", std::stod(score(m.per_class[c].f1))}});
        }
        arr.push_back({{"name", r.name},
                       {"count", m.count},
                       {"accuracy", std::stod(score(m.accuracy))},
                       {"macro_f1", std::stod(score(m.macro_f1))},
                       {"per_class", per_class},
                       {"confusion", {{m.confusion[0][0], m.confusion[0][1]},
                                      {m.confusion[1][0], m.confusion[1][1]}}}});
      }
      out << arr.dump(2) << "\n";
      break;
    }
    case ReportFormat::csv:
      out << "name,count,accuracy,macro_f1,precision_0,recall_0,f1_0,precision_1,recall_1,f1_1,"
             "tn,fp,fn,tp\n";
      for (const auto& r : reports) {
        const auto& m = r.metrics;
        out << r.name << "," << m.count << "," << score(m.accuracy) << "," << score(m.macro_f1);
        for (const auto& c : m.per_class) {
          out << "," << score(c.precision) << "," << score(c.recall) << "," << score(c.f1);
        }
        out << "," << m.confusion[0][0] << "," << m.confusion[0][1] << "," << m.confusion[1][0]
            << "," << m.confusion[1][1] << "\n";
      }
      break;
    case ReportFormat::markdown:
      out << "| name | n | Acc | F1 |\n|---|---:|---:|---:|\n";
      for (const auto& r : reports) {
        out << "| " << r.name << " | " << r.metrics.count << " | " << score(r.metrics.accuracy)
            << " | " << score(r.metrics.macro_f1) << " |\n";
      }
      break;
  }
  return out.str();
}

/// CSV with evaluation languages as the header row and model labels as the
/// first column; cells are accuracy (or macro-F1) x100.
inline std::string render_matrix_csv(const CrossMatrix& m, bool macro_f1 = false) {
  std::ostringstream out;
  out << "train\\test";
  for (const auto& lang : m.languages) out << "," << lang;
  out << "\n";
  for (std::size_t i = 0; i < m.row_labels.size(); ++i) {
    out << m.row_labels[i];
    for (std::size_t j = 0; j < m.languages.size(); ++j) {
      out << "," << format_score(macro_f1 ? m.macro_f1(i, j) : m.accuracy(i, j));
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace collm
