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

#include <gtest/gtest.h>

#include <algorithm>

#include "collm/metrics.hpp"
#include "collm/synth.hpp"
#include "oracles.hpp"

using namespace collm;

namespace {

MetricsReport metrics(const std::vector<int>& truth, const std::vector<int>& pred) {
  return compute_metrics(std::span<const int>(truth), std::span<const int>(pred));
}

}  // namespace

TEST(Metrics, WorkedExample) {
  const auto m = metrics({0, 0, 0, 1, 1}, {0, 0, 1, 1, 0});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.6);
  EXPECT_DOUBLE_EQ(m.per_class[0].f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].f1, 0.5);
  EXPECT_DOUBLE_EQ(m.macro_f1, 7.0 / 12.0);
  EXPECT_EQ(m.confusion[0][0], 2u);
  EXPECT_EQ(m.confusion[0][1], 1u);
  EXPECT_EQ(m.confusion[1][0], 1u);
  EXPECT_EQ(m.confusion[1][1], 1u);
  EXPECT_EQ(m.count, 5u);
}

TEST(Metrics, PerfectAndDegenerate) {
  const auto perfect = metrics({0, 1, 1, 0}, {0, 1, 1, 0});
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  const auto degenerate = metrics({0, 0, 0}, {0, 0, 0});
  EXPECT_EQ(degenerate.accuracy, 1.0);
  EXPECT_EQ(degenerate.per_class[1].f1, 0.0);
  EXPECT_EQ(degenerate.per_class[1].precision, 0.0);
  EXPECT_EQ(degenerate.macro_f1, 0.5);
}

TEST(Metrics, MatchesRationalRecount) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<int> truth(n), pred(n);
    const double p = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.bernoulli(p);
      pred[i] = rng.bernoulli(0.5);
    }
    const auto want = oracle::rational_scores(truth, pred);
    const auto got = metrics(truth, pred);
    ASSERT_NEAR(got.accuracy, want.accuracy.value(), 1e-15);
    ASSERT_NEAR(got.macro_f1, want.macro_f1.value(), 1e-15);
    ASSERT_GE(got.macro_f1, 0.0);
    ASSERT_LE(got.macro_f1, 1.0);
  }
}

TEST(Metrics, InvariantUnderLabelSwapAndRecordOrder) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> truth(50), pred(50);
    for (std::size_t i = 0; i < 50; ++i) {
      truth[i] = static_cast<int>(rng.below(2));
      pred[i] = static_cast<int>(rng.below(2));
    }
    const auto base = metrics(truth, pred);
    std::vector<int> t2 = truth, p2 = pred;
    for (auto& v : t2) v = 1 - v;
    for (auto& v : p2) v = 1 - v;
    EXPECT_DOUBLE_EQ(metrics(t2, p2).macro_f1, base.macro_f1);
    std::vector<std::size_t> idx(50);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    std::vector<int> t3, p3;
    for (auto i : idx) {
      t3.push_back(truth[i]);
      p3.push_back(pred[i]);
    }
    EXPECT_EQ(metrics(t3, p3).macro_f1, base.macro_f1);
    EXPECT_EQ(metrics(t3, p3).accuracy, base.accuracy);
  }
}

TEST(Metrics, Errors) {
  EXPECT_THROW(metrics({}, {}), UsageError);
  EXPECT_THROW(metrics({0, 1}, {0}), UsageError);
  EXPECT_THROW(metrics({0, 2}, {0, 1}), DataError);
}

TEST(Render, TwoDecimalPercentages) {
  EXPECT_EQ(format_score(0.8629), "86.29");
  EXPECT_EQ(format_score(1.0), "100.00");
  EXPECT_EQ(format_score(7.0 / 12.0), "58.33");
  EXPECT_EQ(format_score(0.0), "0.00");
}

TEST(Render, FormatsAndRoundTrip) {
  const std::vector<NamedReport> reports{{"en", metrics({0, 0, 0, 1, 1}, {0, 0, 1, 1, 0})},
                                         {"hi", metrics({0, 1}, {0, 1})}};
  const auto j = nlohmann::json::parse(render_report(reports, ReportFormat::json));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["name"], "en");
  EXPECT_EQ(j[0]["accuracy"].get<double>(), 60.0);
  EXPECT_EQ(j[0]["macro_f1"].get<double>(), 58.33);
  EXPECT_EQ(j[0]["count"], 5);
  EXPECT_EQ(j[0]["confusion"][0][1], 1);
  EXPECT_EQ(j[1]["macro_f1"].get<double>(), 100.0);
  // Re-serializing the parsed document reproduces it.
  EXPECT_EQ(nlohmann::json::parse(j.dump()), j);

  const auto csv = render_report(reports, ReportFormat::csv);
  EXPECT_NE(csv.find("\nen,5,60.00,58.33,"), std::string::npos);
  const auto md = render_report(reports, ReportFormat::markdown);
  EXPECT_NE(md.find("| en | 5 | 60.00 | 58.33 |"), std::string::npos);

  EXPECT_THROW(render_report({}, ReportFormat::json), UsageError);
  EXPECT_THROW(report_format_from_string("xml"), UsageError);
}

namespace {

Checkpoint linear_model(std::size_t dim, double sign, const std::string& lang) {
  Checkpoint c{build_linear(make_ptm("synthetic", dim)), {}, {lang}, 1, 0};
  Tensor<double> w({2, dim});
  for (std::size_t k = 0; k < dim; ++k) w.at(1, k) = sign;
  c.weights.emplace("head.00_dense.weight", w);
  c.weights.emplace("head.00_dense.bias", Tensor<double>({2}));
  return c;
}

}  // namespace

TEST(CrossEval, OrderingDiagonalAndErrors) {
  SynthConfig cfg;
  cfg.n_languages = 3;
  cfg.dim = 16;
  cfg.train_count = 10;
  cfg.test_count = 40;
  const auto langs = synth_generate(cfg);
  std::vector<std::pair<std::string, Checkpoint>> models;
  std::vector<std::pair<std::string, EmbeddingDataset>> data;
  for (std::size_t l = 0; l < 3; ++l) {
    models.emplace_back(langs[l].language, linear_model(16, l == 1 ? -1.0 : 1.0, langs[l].language));
  }
  for (std::size_t l = 3; l-- > 0;) data.emplace_back(langs[l].language, langs[l].test);

  const auto m = cross_eval(models, data);
  EXPECT_EQ(m.languages, (std::vector<std::string>{"lang1", "lang2", "lang3"}));
  EXPECT_EQ(m.row_labels, m.languages);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(m.accuracy(i, j), evaluate(models[i].second, langs[j].test).accuracy);
    }
  }
  const auto csv = render_matrix_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "train\\test,lang1,lang2,lang3");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);

  const auto single = cross_eval({models[0]}, {data[2]});
  EXPECT_EQ(single.cells.size(), 1u);
  EXPECT_EQ(single.accuracy(0, 0), evaluate(models[0].second, langs[0].test).accuracy);

  EXPECT_THROW(cross_eval({models[0]}, data), UsageError);
  EXPECT_THROW(cross_eval(models, {data[0]}), UsageError);
  EmbeddingDataset empty = langs[0].test;
  empty.records.clear();
  EXPECT_THROW(evaluate(models[0].second, empty), UsageError);
}
