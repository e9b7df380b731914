// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "qtune/dataset.h"
#include "qtune/trainer.h"

using namespace qtune;

namespace {

DatasetSpec SmokeData(int classes = 4, int train = 100, int val = 40, uint64_t seed = 3) {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = classes;
  spec.train_count = train;
  spec.val_count = val;
  spec.seed = seed;
  return spec;
}

TrainConfig SmokeTrain() {
  TrainConfig cfg;
  cfg.mode = TrainMode::kAlternating;
  cfg.alternations = 2;
  cfg.batch_size = 25;
  cfg.lr_classifier = 0.002;
  cfg.lr_kernels = 0.02;
  cfg.milestones = {{1, 0.1}};
  cfg.loss.lambda = 0.01;
  cfg.loss.lambda1 = 1.0;
  cfg.loss.c = 10.0;
  cfg.seed = 21;
  cfg.quick_eval_images = 20;
  cfg.quick_rate_train_images = 30;
  return cfg;
}

ClassifierConfig SmokeCls(int classes = 4) {
  ClassifierConfig cfg;
  cfg.num_classes = classes;
  cfg.width_multiplier = 1;
  cfg.blocks_per_group = 1;
  cfg.seed = 5;
  return cfg;
}

std::string FileBytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("lr schedule: paper-shaped milestones") {
  std::vector<Milestone> ms{{50, 0.1}, {100, 0.01}};
  CHECK(LrAt(0.05, ms, 10) == doctest::Approx(0.05));
  CHECK(LrAt(0.05, ms, 50) == doctest::Approx(0.005));
  CHECK(LrAt(0.05, ms, 149) == doctest::Approx(0.0005));
  CHECK_THROWS_AS(LrAt(0.05, ms, -1), std::invalid_argument);
}

TEST_CASE("config validation") {
  TrainConfig cfg = SmokeTrain();
  cfg.milestones = {{5, 0.1}, {5, 0.01}};
  CHECK_THROWS_AS(cfg.Validate(), std::invalid_argument);
  cfg = SmokeTrain();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.Validate(), std::invalid_argument);
}

TEST_CASE("two alternations on a small corpus complete with finite history") {
  Dataset ds = IngestDataset(SmokeData());
  TrainSession s = CreateSession(SmokeTrain(), SmokeCls());
  Train(s, ds);
  REQUIRE(s.history.size() == 4);  // classifier + kernels rows per alternation
  for (const HistoryRow& r : s.history) {
    CHECK(std::isfinite(r.loss));
    CHECK(std::isfinite(r.cla_loss));
    CHECK(std::isfinite(r.quan_loss));
    CHECK(std::isfinite(r.train_acc));
  }
  // Kernel rows carry measured validation metrics.
  CHECK(std::isfinite(s.history[1].val_acc));
  CHECK(std::isfinite(s.history[1].mean_kb));
  CHECK(s.history[1].mean_kb > 0.0);
  // Kernels stayed inside the projection box.
  CHECK(s.kernels.MinEntry() >= 0.0);
  CHECK(s.kernels.MaxEntry() <= 1.0);
}

TEST_CASE("baseline mode: kernels and color are bit-exact after training") {
  Dataset ds = IngestDataset(SmokeData());
  TrainConfig cfg = SmokeTrain();
  cfg.mode = TrainMode::kBaseline;
  cfg.baseline_quality = 50.0;
  TrainSession s = CreateSession(cfg, SmokeCls());
  CompressionKernels before = CompressionKernels::StandardQuality(50.0);
  Train(s, ds);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) {
      CHECK(s.kernels.table(i).value[j] == before.table(i).value[j]);
    }
  }
  ColorTransform bt = ColorTransform::Bt601();
  for (int j = 0; j < 9; ++j) CHECK(s.color.matrix.value[j] == bt.matrix.value[j]);
  // Baseline history has one classifier row per alternation, with metrics.
  REQUIRE(s.history.size() == 2);
  CHECK(s.history[0].phase == "classifier");
  CHECK(std::isfinite(s.history[0].val_acc));
}

TEST_CASE("seeded determinism: identical history to the last bit") {
  Dataset ds = IngestDataset(SmokeData());
  TrainSession a = CreateSession(SmokeTrain(), SmokeCls());
  Train(a, ds);
  TrainSession b = CreateSession(SmokeTrain(), SmokeCls());
  Train(b, ds);
  CHECK(HistoryToCsv(a.history) == HistoryToCsv(b.history));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) {
      CHECK(a.kernels.table(i).value[j] == b.kernels.table(i).value[j]);
    }
  }
}

TEST_CASE("checkpoint: save-load-save produces byte-identical files") {
  Dataset ds = IngestDataset(SmokeData());
  TrainConfig cfg = SmokeTrain();
  cfg.alternations = 1;
  TrainSession s = CreateSession(cfg, SmokeCls());
  Train(s, ds);
  const std::string p1 = "/tmp/qtune_ckpt_a.bin";
  const std::string p2 = "/tmp/qtune_ckpt_b.bin";
  SaveCheckpoint(p1, s);
  TrainSession loaded = LoadCheckpoint(p1, cfg, SmokeCls());
  SaveCheckpoint(p2, loaded);
  CHECK(FileBytes(p1) == FileBytes(p2));
  CHECK(PeekCheckpointHash(p1) == ConfigHash(cfg, SmokeCls()));
}

TEST_CASE("checkpoint: config hash mismatch is an error") {
  Dataset ds = IngestDataset(SmokeData());
  TrainConfig cfg = SmokeTrain();
  cfg.alternations = 1;
  TrainSession s = CreateSession(cfg, SmokeCls());
  Train(s, ds);
  const std::string path = "/tmp/qtune_ckpt_mismatch.bin";
  SaveCheckpoint(path, s);
  TrainConfig other = cfg;
  other.loss.lambda = 0.5;
  CHECK_THROWS_WITH_AS(LoadCheckpoint(path, other, SmokeCls()),
                       doctest::Contains("hash mismatch"), std::runtime_error);
}

TEST_CASE("resume reproduces the uninterrupted run exactly") {
  Dataset ds = IngestDataset(SmokeData());
  TrainConfig cfg = SmokeTrain();
  cfg.alternations = 3;

  TrainSession full = CreateSession(cfg, SmokeCls());
  Train(full, ds);

  const std::string path = "/tmp/qtune_ckpt_resume.bin";
  TrainSession part = CreateSession(cfg, SmokeCls());
  Train(part, ds, path, /*run_limit=*/2);  // simulate an interruption

  TrainSession resumed = LoadCheckpoint(path, cfg, SmokeCls());
  REQUIRE(resumed.next_position == 2);
  Train(resumed, ds);

  CHECK(HistoryToCsv(resumed.history) == HistoryToCsv(full.history));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) {
      CHECK(resumed.kernels.table(i).value[j] == full.kernels.table(i).value[j]);
    }
  }
}

TEST_CASE("joint mode: tiny kernel lr leaves kernels at initialization") {
  Dataset ds = IngestDataset(SmokeData());
  TrainConfig cfg = SmokeTrain();
  cfg.mode = TrainMode::kJoint;
  cfg.epochs = 2;
  cfg.lr_classifier = 0.001;
  cfg.lr_kernels = 1e-8;  // joint-training regime for the kernel group
  cfg.loss.lambda = 0.0;
  cfg.milestones = {{1, 0.1}};
  TrainSession s = CreateSession(cfg, SmokeCls());
  Train(s, ds);
  double max_dq = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) {
      max_dq = std::max(max_dq, std::fabs(s.kernels.table(i).value[j] - 1.0));
    }
  }
  CHECK(max_dq < 1e-4);
  // The recorded learning rate drops by exactly 10x at the milestone.
  REQUIRE(s.history.size() == 2);
  CHECK(s.history[1].lr == doctest::Approx(0.1 * s.history[0].lr).epsilon(1e-12));
}

TEST_CASE("evaluate: deterministic and quantization-coarseness ordering") {
  Dataset ds = IngestDataset(SmokeData(4, 60, 30, 8));
  TrainConfig cfg = SmokeTrain();
  cfg.alternations = 1;
  TrainSession s = CreateSession(cfg, SmokeCls());
  // No training: evaluate the initialized model twice.
  EvalResult a = Evaluate(s, ds);
  EvalResult b = Evaluate(s, ds);
  CHECK(a.top1 == b.top1);
  CHECK(a.mean_psnr == b.mean_psnr);
  CHECK(a.mean_ssim == b.mean_ssim);
  CHECK(a.rate.TotalBits() == b.rate.TotalBits());

  // Unit kernels reconstruct strictly better than coarser kernels.
  TrainSession coarse = CreateSession(cfg, SmokeCls());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) coarse.kernels.table(i).value[j] = 0.25;
  }
  EvalResult c = Evaluate(coarse, ds);
  CHECK(a.mean_psnr > c.mean_psnr);
}

TEST_CASE("history CSV is stable and carries the schema") {
  Dataset ds = IngestDataset(SmokeData());
  TrainConfig cfg = SmokeTrain();
  cfg.alternations = 1;
  TrainSession s = CreateSession(cfg, SmokeCls());
  Train(s, ds);
  const std::string csv = HistoryToCsv(s.history);
  CHECK(csv.find("position,phase,loss,cla_loss,quan_loss,train_acc,val_acc,mean_kb,psnr,ssim,lr") == 0);
  CHECK(csv.find("classifier") != std::string::npos);
  CHECK(csv.find("kernels") != std::string::npos);
}
