// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_RUNNER_H_
#define QTUNE_RUNNER_H_

#include <optional>
#include <string>
#include <vector>

#include "qtune/classifier.h"
#include "qtune/dataset.h"
#include "qtune/trainer.h"

namespace qtune {

// Fully resolved configuration for one command invocation. Defaults are the
// desk-scale settings; a JSON config file and CLI flags override them.
struct RunConfig {
  std::string out_dir = "qtune-out";
  DatasetSpec dataset;
  TrainConfig train;
  ClassifierConfig classifier;
  double quality = 50.0;    // kernels for rate/encode without a checkpoint
  std::string checkpoint;   // input checkpoint (rate/encode/export)
  std::string qtables;      // input q-table JSON (rate/encode)
  std::string resume;       // resume checkpoint for train
  std::vector<double> sweep_lambdas;
  std::vector<double> sweep_cs;
  std::vector<double> sweep_qualities;

  // Applies one master seed to dataset, trainer, and classifier.
  void SetSeed(uint64_t seed);
};

RunConfig LoadRunConfigJson(const std::string& path, const RunConfig& base);
std::string RunConfigToJson(const RunConfig& cfg);

// Commands. Each creates out_dir, echoes the resolved config there before
// doing any work, and returns a process exit code (0 = all outputs written).
int CmdTrain(const RunConfig& cfg);
int CmdSweep(const RunConfig& cfg);
int CmdRate(const RunConfig& cfg);
int CmdEncode(const RunConfig& cfg);
int CmdExport(const RunConfig& cfg);
int CmdIngestCheck(const RunConfig& cfg);

}  // namespace qtune

#endif  // QTUNE_RUNNER_H_
