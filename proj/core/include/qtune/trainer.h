// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_TRAINER_H_
#define QTUNE_TRAINER_H_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qtune/classifier.h"
#include "qtune/dataset.h"
#include "qtune/jpeg_pipeline.h"
#include "qtune/losses.h"
#include "qtune/optim.h"
#include "qtune/rate.h"
#include "qtune/rng.h"

namespace qtune {

enum class TrainMode { kAlternating, kJoint, kBaseline };

struct Milestone {
  int at = 0;
  double scale = 1.0;
};

struct TrainConfig {
  TrainMode mode = TrainMode::kAlternating;
  int alternations = 20;  // alternating/baseline: [2 classifier epochs + 1 kernel epoch] each
  int epochs = 90;        // joint
  int batch_size = 100;
  double lr_classifier = 0.002;
  double lr_kernels = 0.02;
  double lr_color = 1e-4;
  std::vector<Milestone> milestones{{7, 0.1}, {14, 0.01}};
  LossConfig loss;
  bool train_color = false;
  uint64_t seed = 0;
  double clip_norm = 5.0;  // kernel/color gradient group
  bool augment_flip = true;
  bool augment_crop = false;
  double baseline_quality = 50.0;  // fixed tables in baseline mode
  int topk = 1;
  // Per-alternation history measurements run on seeded subsets to stay cheap;
  // the final Evaluate uses the full splits.
  int quick_eval_images = 250;
  int quick_rate_train_images = 500;
  size_t huffman_sample = 50000;

  void Validate() const;
};

// Base learning rate scaled by the last milestone at or before `position`.
double LrAt(double base, const std::vector<Milestone>& milestones, int position);

struct HistoryRow {
  int position = 0;  // alternation (alternating/baseline) or epoch (joint)
  std::string phase;
  double loss = 0.0, cla_loss = 0.0, quan_loss = 0.0, train_acc = 0.0;
  // Quiet NaN marks "not measured"; written as an empty CSV field.
  double val_acc, mean_kb, psnr, ssim;
  double lr = 0.0;
  HistoryRow();
};

std::string HistoryToCsv(const std::vector<HistoryRow>& rows);

struct EvalResult {
  double top1 = 0.0;
  double topk = 0.0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  RateReport rate;
};

// All mutable training state; checkpointable.
struct TrainSession {
  TrainConfig cfg;
  ClassifierConfig cls_cfg;
  std::unique_ptr<Classifier> classifier;
  CompressionKernels kernels;
  ColorTransform color;
  std::map<std::string, AdamState> adam;
  Rng rng;
  int next_position = 0;  // first alternation/epoch still to run
  uint64_t global_step = 0;
  std::vector<HistoryRow> history;
  std::vector<std::string> warnings;

  std::vector<Param*> AllParams();
  AdamState& AdamFor(Param& p);
};

TrainSession CreateSession(const TrainConfig& cfg, const ClassifierConfig& cls_cfg);

// Runs the configured schedule from session.next_position to the end.
// When checkpoint_path is non-empty, the session is saved after every
// alternation/epoch. A non-finite loss aborts with the last good state saved.
// run_limit > 0 executes at most that many positions in this call (an
// interrupted run is resumed by loading the checkpoint and calling again).
void Train(TrainSession& session, const Dataset& data, const std::string& checkpoint_path = "",
           int run_limit = -1);

// Full-split evaluation; Huffman tables are rebuilt from the training split
// with the current kernels before the validation split is measured.
EvalResult Evaluate(TrainSession& session, const Dataset& data);

// --- checkpoint io ---------------------------------------------------------------

uint64_t ConfigHash(const TrainConfig& cfg, const ClassifierConfig& cls_cfg);
void SaveCheckpoint(const std::string& path, const TrainSession& session);
// Requires configs matching the saved config hash.
TrainSession LoadCheckpoint(const std::string& path, const TrainConfig& cfg,
                            const ClassifierConfig& cls_cfg);
// Reads only the embedded config hash.
uint64_t PeekCheckpointHash(const std::string& path);
// Restores just the codec parameters (kernels + color transform) from any
// checkpoint, for rate/export tooling that does not rebuild the classifier.
void LoadCodecParams(const std::string& path, CompressionKernels& kernels, ColorTransform& color);

}  // namespace qtune

#endif  // QTUNE_TRAINER_H_
