// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qtune/runner.h"

namespace {

using qtune::DatasetKind;
using qtune::RunConfig;

// Resolves --dataset values: "synthetic", a .bin file or directory of .bin
// files (CIFAR binary records), or an image folder.
void ApplyDatasetFlag(RunConfig& cfg, const std::string& value) {
  if (value == "synthetic") {
    cfg.dataset.kind = DatasetKind::kSynthetic;
    cfg.dataset.path.clear();
    return;
  }
  namespace fs = std::filesystem;
  cfg.dataset.path = value;
  if (value.size() > 4 && value.substr(value.size() - 4) == ".bin") {
    cfg.dataset.kind = DatasetKind::kCifarBinary;
    return;
  }
  if (fs::is_directory(value)) {
    for (const auto& e : fs::directory_iterator(value)) {
      if (e.path().extension() == ".bin") {
        cfg.dataset.kind = DatasetKind::kCifarBinary;
        return;
      }
    }
    cfg.dataset.kind = DatasetKind::kImageFolder;
    return;
  }
  throw CLI::ValidationError("--dataset", "not 'synthetic', a .bin path, or a directory: " + value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qtune: JPEG quantization-table tuning for classification"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir, dataset_flag, mode, checkpoint, qtables, resume;
  std::optional<double> lambda, lambda1, c_param, quality;
  std::optional<size_t> subset;
  std::optional<int> alternations, epochs, batch_size, classes, topk;
  std::vector<double> sweep_lambdas, sweep_cs, sweep_qualities;

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Master seed (dataset, trainer, classifier)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--dataset", dataset_flag,
                 "'synthetic', CIFAR .bin file/directory, or image folder");
  app.add_option("--subset", subset, "Seeded training subset size");
  app.add_option("--mode", mode, "baseline|alternating|joint");
  app.add_option("--lambda", lambda, "Rate penalty weight");
  app.add_option("--lambda1", lambda1, "L1 weight inside the kernel penalty");
  app.add_option("--c", c_param, "Hinge threshold inside the kernel penalty");
  app.add_option("--quality", quality, "JPEG quality percentage for standard tables");
  app.add_option("--checkpoint", checkpoint, "Input checkpoint path");
  app.add_option("--qtables", qtables, "Input q-table JSON path");
  app.add_option("--resume", resume, "Checkpoint to resume training from");
  app.add_option("--alternations", alternations, "Alternating-mode rounds");
  app.add_option("--epochs", epochs, "Joint-mode epochs");
  app.add_option("--batch-size", batch_size, "Batch size");
  app.add_option("--classes", classes, "Synthetic dataset class count");
  app.add_option("--topk", topk, "Additional top-k accuracy to report");
  app.add_option("--sweep-lambdas", sweep_lambdas, "Sweep over lambda values");
  app.add_option("--sweep-cs", sweep_cs, "Sweep over c values");
  app.add_option("--sweep-qualities", sweep_qualities, "Baseline sweep over qualities");

  CLI::App* cmd_train = app.add_subcommand("train", "Train a model and export results");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "One training run per sweep value");
  CLI::App* cmd_rate = app.add_subcommand("rate", "Measure entropy-coded payload size");
  CLI::App* cmd_encode = app.add_subcommand("encode", "Write reconstructions and per-image stats");
  CLI::App* cmd_export = app.add_subcommand("export", "Export Q-tables from a checkpoint");
  CLI::App* cmd_ingest = app.add_subcommand("ingest-check", "Validate and summarize a dataset");
  for (CLI::App* sub : {cmd_train, cmd_sweep, cmd_rate, cmd_encode, cmd_export, cmd_ingest}) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = qtune::LoadRunConfigJson(config_path, cfg);
    if (seed) cfg.SetSeed(*seed);
    if (out_dir) cfg.out_dir = *out_dir;
    if (dataset_flag) ApplyDatasetFlag(cfg, *dataset_flag);
    if (subset) cfg.dataset.train_subset = *subset;
    if (mode) {
      if (*mode == "baseline") {
        cfg.train.mode = qtune::TrainMode::kBaseline;
      } else if (*mode == "alternating") {
        cfg.train.mode = qtune::TrainMode::kAlternating;
      } else if (*mode == "joint") {
        cfg.train.mode = qtune::TrainMode::kJoint;
      } else {
        std::cerr << "unknown --mode " << *mode << "\n";
        return 2;
      }
    }
    if (lambda) cfg.train.loss.lambda = *lambda;
    if (lambda1) cfg.train.loss.lambda1 = *lambda1;
    if (c_param) cfg.train.loss.c = *c_param;
    if (quality) {
      cfg.quality = *quality;
      cfg.train.baseline_quality = *quality;
    }
    if (checkpoint) cfg.checkpoint = *checkpoint;
    if (qtables) cfg.qtables = *qtables;
    if (resume) cfg.resume = *resume;
    if (alternations) cfg.train.alternations = *alternations;
    if (epochs) cfg.train.epochs = *epochs;
    if (batch_size) cfg.train.batch_size = *batch_size;
    if (classes) cfg.dataset.classes = *classes;
    if (topk) cfg.train.topk = *topk;
    if (!sweep_lambdas.empty()) cfg.sweep_lambdas = sweep_lambdas;
    if (!sweep_cs.empty()) cfg.sweep_cs = sweep_cs;
    if (!sweep_qualities.empty()) cfg.sweep_qualities = sweep_qualities;

    if (cmd_train->parsed()) return qtune::CmdTrain(cfg);
    if (cmd_sweep->parsed()) return qtune::CmdSweep(cfg);
    if (cmd_rate->parsed()) return qtune::CmdRate(cfg);
    if (cmd_encode->parsed()) return qtune::CmdEncode(cfg);
    if (cmd_export->parsed()) return qtune::CmdExport(cfg);
    if (cmd_ingest->parsed()) return qtune::CmdIngestCheck(cfg);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qtune: " << e.what() << "\n";
    return 1;
  }
}
