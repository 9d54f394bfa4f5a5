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

// collm: command-line entry point (synth, train, eval, within, merge, plugin,
// crosseval, inspect).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "collm.hpp"

namespace fs = std::filesystem;
using namespace collm;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kIncompatible = 4 };

struct GlobalOptions {
  std::uint64_t seed = 7;
  std::string precision = "f32";
  bool quiet = false;
};

struct TrainFlags {
  std::string arch = "cnn";
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch = 32;
  double val_frac = 0.1;
  std::size_t patience = 5;
  double dropout = 0.2;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--arch", arch, "Downstream block kind")
        ->check(CLI::IsMember({"cnn", "transformer"}))
        ->capture_default_str();
    cmd->add_option("--epochs", epochs)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--lr", lr, "RAdam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--batch", batch)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--val-frac", val_frac, "Stratified validation share of the training data")
        ->check(CLI::Range(0.0, 0.4999))
        ->capture_default_str();
    cmd->add_option("--patience", patience, "Early-stopping patience in epochs")->capture_default_str();
    cmd->add_option("--dropout", dropout)->check(CLI::Range(0.0, 0.9999))->capture_default_str();
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.val_fraction = val_frac;
    cfg.patience = patience;
    cfg.seed = seed;
    cfg.dropout = dropout;
    cfg.optimizer.lr = lr;
    cfg.validate();
    return cfg;
  }

  ArchitectureSpec build(const PtmInfo& a, const PtmInfo* b) const {
    ArchOptions opts;
    opts.dropout = dropout;
    const BlockKind block = block_kind_from_string(arch);
    if (b) return build_fusion(a, *b, block, opts);
    return block == BlockKind::conv ? build_cnn(a, opts) : build_transformer(a, opts);
  }
};

void say(const GlobalOptions& g, const std::string& text) {
  if (!g.quiet) std::cout << text << std::flush;
}

std::string join(const std::set<std::string>& items, const char* sep = "+") {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

TrainResult run_training(const GlobalOptions& g, const TrainFlags& flags, const EmbeddingDataset& train,
                         const EmbeddingDataset* train2) {
  const TrainConfig cfg = flags.config(g.seed);
  if (train2) {
    const PairedDataset paired = join_for_fusion(train, *train2);
    const ArchitectureSpec arch = flags.build(train.ptm, &train2->ptm);
    return g.precision == "f64" ? train_fusion<double>(arch, paired, cfg)
                                : train_fusion<float>(arch, paired, cfg);
  }
  const ArchitectureSpec arch = flags.build(train.ptm, nullptr);
  return g.precision == "f64" ? collm::train<double>(arch, train, cfg)
                              : collm::train<float>(arch, train, cfg);
}

std::string history_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,val_accuracy,val_macro_f1\n";
  char line[128];
  for (const auto& h : r.history) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", h.epoch, h.train_loss, h.val_accuracy,
                  h.val_macro_f1);
    out += line;
  }
  return out;
}

std::string training_summary(const TrainResult& r) {
  const auto& best = r.history.at(r.best_epoch - 1);
  return "trained " + std::to_string(r.history.size()) + " epoch(s); best epoch " +
         std::to_string(r.best_epoch) + " (val Acc " + format_score(best.val_accuracy) + ", val F1 " +
         format_score(best.val_macro_f1) + ")\n";
}

MetricsReport evaluate_any(const Checkpoint& model, const EmbeddingDataset& data,
                           const EmbeddingDataset* data2) {
  if (data2) return evaluate(model, join_for_fusion(data, *data2));
  return evaluate(model, data);
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw UsageError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw UsageError("no *" + ext + " files in '" + dir.string() + "'");
  return out;
}

std::string inspect_text(const Checkpoint& c) {
  std::string out;
  out += "arch_hash: " + c.arch_hash() + "\n";
  out += "languages: " + join(c.languages, ", ") + "\n";
  out += "merge_count: " + std::to_string(c.merge_count) + "\n";
  out += "seed: " + std::to_string(c.seed) + "\n";
  out += "architecture: " + c.spec.to_json().dump(2) + "\n";
  out += "tensors (name, shape, L1 norm):\n";
  char line[256];
  for (const auto& [name, t] : c.weights) {
    std::snprintf(line, sizeof line, "  %-32s %-14s %.9g\n", name.c_str(), shape_string(t.shape()).c_str(),
                  l1_norm(t));
    out += line;
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"CoLLM toolkit: train audio-abuse classifiers on speech embeddings and merge "
               "per-language models by L1-normalized weight averaging"};
  app.require_subcommand(1, 1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--precision", g.precision, "Training arithmetic")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  app.fallthrough();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic multi-language AEMB datasets");
  SynthConfig sc;
  std::string synth_mode = "shared";
  std::string synth_out;
  synth->add_option("--languages", sc.n_languages)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--dim", sc.dim)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--train-count", sc.train_count)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--test-count", sc.test_count)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--mode", synth_mode)->check(CLI::IsMember({"shared", "disjoint"}))->capture_default_str();
  synth->add_option("--separation", sc.separation)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--offset-scale", sc.offset_scale)->check(CLI::NonNegativeNumber)->capture_default_str();
  synth->add_option("--ptm", sc.ptm, "PTM name recorded in the files")->capture_default_str();
  synth->add_option("--out-dir", synth_out, "Writes train/, test/ and one manifest per language")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one classifier");
  TrainFlags train_flags;
  train_flags.add_to(train_cmd);
  std::string train_path, train2_path, train_out, history_out;
  train_cmd->add_option("--train", train_path, "Training AEMB file")->required();
  train_cmd->add_option("--train2", train2_path, "Second representation (fusion model)");
  train_cmd->add_option("--out", train_out, "Output ACKP checkpoint")->required();
  train_cmd->add_option("--history", history_out, "Optional per-epoch CSV");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on an AEMB file");
  std::string eval_model, eval_data, eval_data2, eval_format = "md", eval_name;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--data2", eval_data2, "Second representation (fusion model)");
  eval_cmd->add_option("--format", eval_format)
      ->check(CLI::IsMember({"json", "csv", "md", "markdown"}))
      ->capture_default_str();
  eval_cmd->add_option("--name", eval_name, "Row label (default: data language)");

  // within
  auto* within = app.add_subcommand(
      "within", "Within-language protocol: train on a manifest's train split, score its test split");
  TrainFlags within_flags;
  within_flags.add_to(within);
  std::string manifest_path, manifest2_path, within_format = "md", within_out;
  within->add_option("--manifest", manifest_path)->required();
  within->add_option("--manifest2", manifest2_path, "Second representation (fusion model)");
  within->add_option("--format", within_format)
      ->check(CLI::IsMember({"json", "csv", "md", "markdown"}))
      ->capture_default_str();
  within->add_option("--out", within_out, "Optionally keep the trained checkpoint");

  // merge
  auto* merge_cmd = app.add_subcommand("merge", "In-hand merge of per-language checkpoints");
  std::string granularity = "tensor", rescale = "none", merge_out, merge_report;
  bool sum_compat = false;
  std::vector<std::string> merge_inputs;
  for (auto* cmd : {merge_cmd}) {
    cmd->add_option("--granularity", granularity)
        ->check(CLI::IsMember({"tensor", "layer", "model"}))
        ->capture_default_str();
    cmd->add_option("--rescale", rescale)->check(CLI::IsMember({"none", "mean-norm"}))->capture_default_str();
    cmd->add_flag("--sum-compat", sum_compat, "Sum normalized weights instead of averaging");
  }
  merge_cmd->add_option("--out", merge_out)->required();
  merge_cmd->add_option("--report", merge_report, "Write the merge report JSON here (default stdout)");
  merge_cmd->add_option("inputs", merge_inputs, "Input ACKP checkpoints")->required();

  // plugin
  auto* plugin = app.add_subcommand("plugin", "Plug-in merge of one more checkpoint into a merged model");
  std::string plugin_base, plugin_add, plugin_out, plugin_report;
  plugin->add_option("--base", plugin_base)->required();
  plugin->add_option("--add", plugin_add)->required();
  plugin->add_option("--out", plugin_out)->required();
  plugin->add_option("--granularity", granularity)
      ->check(CLI::IsMember({"tensor", "layer", "model"}))
      ->capture_default_str();
  plugin->add_flag("--sum-compat", sum_compat, "Sum normalized weights instead of averaging");
  plugin->add_option("--report", plugin_report, "Write the merge report JSON here (default stdout)");

  // crosseval
  auto* crosseval = app.add_subcommand("crosseval", "Cross-lingual evaluation matrix");
  std::string models_dir, data_dir, matrix_out, metric = "acc";
  crosseval->add_option("--models", models_dir, "Directory of *.ackp checkpoints")->required();
  crosseval->add_option("--data", data_dir, "Directory of *.aemb evaluation sets")->required();
  crosseval->add_option("--out", matrix_out, "Matrix CSV")->required();
  crosseval->add_option("--metric", metric)->check(CLI::IsMember({"acc", "f1"}))->capture_default_str();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Print a checkpoint's architecture, hash and tensor norms");
  std::string inspect_model;
  inspect->add_option("--model", inspect_model)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*synth) {
    sc.mode = synth_mode_from_string(synth_mode);
    sc.seed = g.seed;
    sc.validate();
    const auto languages = synth_generate(sc);
    const fs::path root(synth_out);
    fs::create_directories(root / "train");
    fs::create_directories(root / "test");
    for (const auto& lang : languages) {
      const fs::path train_file = root / "train" / (lang.language + ".aemb");
      const fs::path test_file = root / "test" / (lang.language + ".aemb");
      write_embeddings(lang.train, train_file);
      write_embeddings(lang.test, test_file);
      write_manifest({lang.language, fs::path("train") / (lang.language + ".aemb"),
                      fs::path("test") / (lang.language + ".aemb")},
                     root / (lang.language + ".json"));
    }
    say(g, "wrote " + std::to_string(languages.size()) + " language(s) to " + root.string() + "\n");
    return kOk;
  }

  if (*train_cmd) {
    const EmbeddingDataset train = read_embeddings(train_path);
    std::optional<EmbeddingDataset> train2;
    if (!train2_path.empty()) train2 = read_embeddings(train2_path);
    const TrainResult r = run_training(g, train_flags, train, train2 ? &*train2 : nullptr);
    save_checkpoint(r.checkpoint, train_out);
    if (!history_out.empty()) write_file_atomic(history_out, history_csv(r));
    say(g, training_summary(r) + "saved " + train_out + "\n");
    return kOk;
  }

  if (*eval_cmd) {
    const ReportFormat format = report_format_from_string(eval_format);
    const Checkpoint model = load_checkpoint(eval_model);
    const EmbeddingDataset data = read_embeddings(eval_data);
    std::optional<EmbeddingDataset> data2;
    if (!eval_data2.empty()) data2 = read_embeddings(eval_data2);
    const MetricsReport m = evaluate_any(model, data, data2 ? &*data2 : nullptr);
    std::cout << render_report({{eval_name.empty() ? data.language : eval_name, m}}, format);
    return kOk;
  }

  if (*within) {
    const ReportFormat format = report_format_from_string(within_format);
    const auto [train, test] = load_split(read_manifest(manifest_path));
    std::optional<std::pair<EmbeddingDataset, EmbeddingDataset>> second;
    if (!manifest2_path.empty()) second = load_split(read_manifest(manifest2_path));
    const TrainResult r =
        run_training(g, within_flags, train, second ? &second->first : nullptr);
    if (!within_out.empty()) save_checkpoint(r.checkpoint, within_out);
    const MetricsReport m = evaluate_any(r.checkpoint, test, second ? &second->second : nullptr);
    std::string name = train.language + "/" + train.ptm.name;
    if (second) name += "+" + second->first.ptm.name;
    name += "/" + within_flags.arch;
    if (!g.quiet) std::cerr << training_summary(r);
    std::cout << render_report({{name, m}}, format);
    return kOk;
  }

  if (*merge_cmd || *plugin) {
    MergeConfig cfg;
    cfg.granularity = granularity_from_string(granularity);
    cfg.rescale = rescale_from_string(rescale);
    cfg.sum_instead_of_mean = sum_compat;
    MergeResult result;
    std::string out_path, report_path;
    if (*merge_cmd) {
      std::vector<Checkpoint> inputs;
      for (const auto& p : merge_inputs) inputs.push_back(load_checkpoint(p));
      result = collm_merge(inputs, cfg);
      out_path = merge_out;
      report_path = merge_report;
    } else {
      result = plugin_merge(load_checkpoint(plugin_base), load_checkpoint(plugin_add), cfg);
      out_path = plugin_out;
      report_path = plugin_report;
    }
    save_checkpoint(result.merged, out_path);
    const std::string report = result.report.to_json().dump(2) + "\n";
    if (!report_path.empty()) {
      write_file_atomic(report_path, report);
    } else if (!g.quiet) {
      std::cout << report;
    }
    if (!g.quiet) {
      std::cerr << "merged " << result.merged.merge_count << " model(s) ["
                << join(result.merged.languages) << "] into " << out_path << "\n";
    }
    return kOk;
  }

  if (*crosseval) {
    const auto model_files = files_with_extension(models_dir, ".ackp");
    const auto data_files = files_with_extension(data_dir, ".aemb");
    std::vector<std::pair<std::string, EmbeddingDataset>> datasets;
    for (const auto& f : data_files) {
      EmbeddingDataset ds = read_embeddings(f);
      const std::string lang = ds.language;
      datasets.emplace_back(lang, std::move(ds));
    }
    std::vector<std::pair<std::string, Checkpoint>> individual, merged;
    for (const auto& f : model_files) {
      Checkpoint c = load_checkpoint(f);
      if (c.spec.inputs.size() != 1) {
        throw UsageError("crosseval handles single-input models only; '" + f.string() + "' is a fusion model");
      }
      if (c.languages.size() == 1 && c.merge_count == 1) {
        individual.emplace_back(*c.languages.begin(), std::move(c));
      } else {
        merged.emplace_back(f.stem().string(), std::move(c));
      }
    }
    // Individual models in evaluation-language order, then merged models.
    std::vector<std::pair<std::string, Checkpoint>> rows;
    for (const auto& [lang, ds] : datasets) {
      for (auto& m : individual) {
        if (m.first == lang) rows.push_back(m);
      }
    }
    for (auto& m : individual) {
      if (std::none_of(datasets.begin(), datasets.end(), [&](const auto& d) { return d.first == m.first; })) {
        rows.push_back(m);
      }
    }
    rows.insert(rows.end(), merged.begin(), merged.end());
    const CrossMatrix matrix = evaluate_grid(rows, datasets);
    const std::string csv = render_matrix_csv(matrix, metric == "f1");
    write_file_atomic(matrix_out, csv);
    say(g, csv);
    return kOk;
  }

  if (*inspect) {
    std::cout << inspect_text(load_checkpoint(inspect_model));
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CompatibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIncompatible;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
