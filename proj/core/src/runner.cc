// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/runner.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "qtune/metrics.h"
#include "qtune/plot.h"
#include "qtune/rate.h"

namespace qtune {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::SetSeed(uint64_t seed) {
  dataset.seed = seed;
  dataset.subset_seed = seed;
  train.seed = seed;
  classifier.seed = seed;
}

namespace {

std::string ModeName(TrainMode m) {
  switch (m) {
    case TrainMode::kAlternating:
      return "alternating";
    case TrainMode::kJoint:
      return "joint";
    case TrainMode::kBaseline:
      return "baseline";
  }
  return "?";
}

TrainMode ModeFromName(const std::string& s) {
  if (s == "alternating") return TrainMode::kAlternating;
  if (s == "joint") return TrainMode::kJoint;
  if (s == "baseline") return TrainMode::kBaseline;
  throw std::invalid_argument("unknown train mode: " + s);
}

std::string KindName(DatasetKind k) {
  switch (k) {
    case DatasetKind::kCifarBinary:
      return "cifar_binary";
    case DatasetKind::kImageFolder:
      return "image_folder";
    case DatasetKind::kSynthetic:
      return "synthetic";
  }
  return "?";
}

DatasetKind KindFromName(const std::string& s) {
  if (s == "cifar_binary") return DatasetKind::kCifarBinary;
  if (s == "image_folder") return DatasetKind::kImageFolder;
  if (s == "synthetic") return DatasetKind::kSynthetic;
  throw std::invalid_argument("unknown dataset kind: " + s);
}

json MilestonesToJson(const std::vector<Milestone>& ms) {
  json arr = json::array();
  for (const Milestone& m : ms) arr.push_back({{"at", m.at}, {"scale", m.scale}});
  return arr;
}

json ToJson(const RunConfig& c) {
  json j;
  j["out"] = c.out_dir;
  j["quality"] = c.quality;
  j["checkpoint"] = c.checkpoint;
  j["qtables"] = c.qtables;
  j["resume"] = c.resume;
  j["sweep"]["lambdas"] = c.sweep_lambdas;
  j["sweep"]["cs"] = c.sweep_cs;
  j["sweep"]["qualities"] = c.sweep_qualities;

  json d;
  d["kind"] = KindName(c.dataset.kind);
  d["path"] = c.dataset.path;
  d["classes"] = c.dataset.classes;
  d["train_count"] = c.dataset.train_count;
  d["val_count"] = c.dataset.val_count;
  d["height"] = c.dataset.height;
  d["width"] = c.dataset.width;
  d["seed"] = c.dataset.seed;
  d["label_bytes"] = c.dataset.label_bytes;
  d["class_subset"] = c.dataset.class_subset;
  d["train_subset"] = c.dataset.train_subset;
  d["val_subset"] = c.dataset.val_subset;
  d["subset_seed"] = c.dataset.subset_seed;
  j["dataset"] = d;

  json t;
  t["mode"] = ModeName(c.train.mode);
  t["alternations"] = c.train.alternations;
  t["epochs"] = c.train.epochs;
  t["batch_size"] = c.train.batch_size;
  t["lr_classifier"] = c.train.lr_classifier;
  t["lr_kernels"] = c.train.lr_kernels;
  t["lr_color"] = c.train.lr_color;
  t["milestones"] = MilestonesToJson(c.train.milestones);
  t["lambda"] = c.train.loss.lambda;
  t["lambda1"] = c.train.loss.lambda1;
  t["c"] = c.train.loss.c;
  t["penalty"] = c.train.loss.penalty == PenaltyKind::kHingeL1 ? "hinge_l1" : "pure_l2";
  t["train_color"] = c.train.train_color;
  t["seed"] = c.train.seed;
  t["clip_norm"] = c.train.clip_norm;
  t["augment_flip"] = c.train.augment_flip;
  t["augment_crop"] = c.train.augment_crop;
  t["baseline_quality"] = c.train.baseline_quality;
  t["topk"] = c.train.topk;
  t["quick_eval_images"] = c.train.quick_eval_images;
  t["quick_rate_train_images"] = c.train.quick_rate_train_images;
  t["huffman_sample"] = c.train.huffman_sample;
  j["train"] = t;

  json cl;
  cl["input_mode"] = c.classifier.input_mode == InputMode::kPixel ? "pixel" : "dct";
  cl["num_classes"] = c.classifier.num_classes;
  cl["k"] = c.classifier.width_multiplier;
  cl["blocks"] = c.classifier.blocks_per_group;
  cl["seed"] = c.classifier.seed;
  cl["frontend_channels"] = c.classifier.frontend_channels;
  j["classifier"] = cl;
  return j;
}

template <typename T>
void MaybeGet(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void FromJson(const json& j, RunConfig& c) {
  MaybeGet(j, "out", c.out_dir);
  MaybeGet(j, "quality", c.quality);
  MaybeGet(j, "checkpoint", c.checkpoint);
  MaybeGet(j, "qtables", c.qtables);
  MaybeGet(j, "resume", c.resume);
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    MaybeGet(s, "lambdas", c.sweep_lambdas);
    MaybeGet(s, "cs", c.sweep_cs);
    MaybeGet(s, "qualities", c.sweep_qualities);
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (d.contains("kind")) c.dataset.kind = KindFromName(d.at("kind").get<std::string>());
    MaybeGet(d, "path", c.dataset.path);
    MaybeGet(d, "classes", c.dataset.classes);
    MaybeGet(d, "train_count", c.dataset.train_count);
    MaybeGet(d, "val_count", c.dataset.val_count);
    MaybeGet(d, "height", c.dataset.height);
    MaybeGet(d, "width", c.dataset.width);
    MaybeGet(d, "seed", c.dataset.seed);
    MaybeGet(d, "label_bytes", c.dataset.label_bytes);
    MaybeGet(d, "class_subset", c.dataset.class_subset);
    MaybeGet(d, "train_subset", c.dataset.train_subset);
    MaybeGet(d, "val_subset", c.dataset.val_subset);
    MaybeGet(d, "subset_seed", c.dataset.subset_seed);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    if (t.contains("mode")) c.train.mode = ModeFromName(t.at("mode").get<std::string>());
    MaybeGet(t, "alternations", c.train.alternations);
    MaybeGet(t, "epochs", c.train.epochs);
    MaybeGet(t, "batch_size", c.train.batch_size);
    MaybeGet(t, "lr_classifier", c.train.lr_classifier);
    MaybeGet(t, "lr_kernels", c.train.lr_kernels);
    MaybeGet(t, "lr_color", c.train.lr_color);
    if (t.contains("milestones")) {
      c.train.milestones.clear();
      for (const json& m : t.at("milestones")) {
        c.train.milestones.push_back({m.at("at").get<int>(), m.at("scale").get<double>()});
      }
    }
    MaybeGet(t, "lambda", c.train.loss.lambda);
    MaybeGet(t, "lambda1", c.train.loss.lambda1);
    MaybeGet(t, "c", c.train.loss.c);
    if (t.contains("penalty")) {
      const std::string p = t.at("penalty").get<std::string>();
      if (p == "hinge_l1") {
        c.train.loss.penalty = PenaltyKind::kHingeL1;
      } else if (p == "pure_l2") {
        c.train.loss.penalty = PenaltyKind::kPureL2;
      } else {
        throw std::invalid_argument("unknown penalty kind: " + p);
      }
    }
    MaybeGet(t, "train_color", c.train.train_color);
    MaybeGet(t, "seed", c.train.seed);
    MaybeGet(t, "clip_norm", c.train.clip_norm);
    MaybeGet(t, "augment_flip", c.train.augment_flip);
    MaybeGet(t, "augment_crop", c.train.augment_crop);
    MaybeGet(t, "baseline_quality", c.train.baseline_quality);
    MaybeGet(t, "topk", c.train.topk);
    MaybeGet(t, "quick_eval_images", c.train.quick_eval_images);
    MaybeGet(t, "quick_rate_train_images", c.train.quick_rate_train_images);
    MaybeGet(t, "huffman_sample", c.train.huffman_sample);
  }
  if (j.contains("classifier")) {
    const json& cl = j.at("classifier");
    if (cl.contains("input_mode")) {
      const std::string m = cl.at("input_mode").get<std::string>();
      if (m == "pixel") {
        c.classifier.input_mode = InputMode::kPixel;
      } else if (m == "dct") {
        c.classifier.input_mode = InputMode::kDct;
      } else {
        throw std::invalid_argument("unknown input mode: " + m);
      }
    }
    MaybeGet(cl, "num_classes", c.classifier.num_classes);
    MaybeGet(cl, "k", c.classifier.width_multiplier);
    MaybeGet(cl, "blocks", c.classifier.blocks_per_group);
    MaybeGet(cl, "seed", c.classifier.seed);
    MaybeGet(cl, "frontend_channels", c.classifier.frontend_channels);
  }
}

void EchoConfig(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream f(fs::path(cfg.out_dir) / "config.json");
  if (!f) throw std::runtime_error("cannot write config echo in " + cfg.out_dir);
  f << RunConfigToJson(cfg) << "\n";
}

void WriteFileOrThrow(const fs::path& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << content;
  if (!f) throw std::runtime_error("short write to " + path.string());
}

// Classifier class count follows the dataset unless set explicitly.
void SyncClasses(RunConfig& cfg, const Dataset& ds) {
  if (cfg.classifier.num_classes != ds.classes) cfg.classifier.num_classes = ds.classes;
}

CompressionKernels KernelsFromSources(const RunConfig& cfg, ColorTransform& color) {
  if (!cfg.checkpoint.empty()) {
    CompressionKernels k = CompressionKernels::Ones();
    LoadCodecParams(cfg.checkpoint, k, color);
    return k;
  }
  if (!cfg.qtables.empty()) {
    return KernelsFromExport(LoadQTableJson(cfg.qtables));
  }
  return CompressionKernels::StandardQuality(cfg.quality);
}

json SummaryJson(const EvalResult& eval, const TrainSession* session) {
  json s;
  s["top1"] = eval.top1;
  s["topk"] = eval.topk;
  s["mean_psnr"] = eval.mean_psnr;
  s["mean_ssim"] = eval.mean_ssim;
  s["mean_kb"] = eval.rate.mean_kb;
  s["median_kb"] = eval.rate.median_kb;
  s["total_bits"] = eval.rate.TotalBits();
  s["escapes"] = eval.rate.escapes;
  if (session != nullptr) {
    s["param_count"] = const_cast<TrainSession*>(session)->classifier->ParamCount();
    s["warnings"] = session->warnings;
    json freq = json::array();
    for (int64_t b : eval.rate.frequency_bits) freq.push_back(b);
    s["frequency_bits"] = freq;
  }
  return s;
}

// Shared by CmdTrain and each sweep point.
EvalResult TrainOneRun(RunConfig cfg, TrainSession* session_out = nullptr,
                       TrainSession** keep = nullptr) {
  (void)keep;
  Dataset ds = IngestDataset(cfg.dataset);
  SyncClasses(cfg, ds);

  TrainSession session = !cfg.resume.empty()
                             ? LoadCheckpoint(cfg.resume, cfg.train, cfg.classifier)
                             : CreateSession(cfg.train, cfg.classifier);
  const std::string ckpt = (fs::path(cfg.out_dir) / "checkpoint.qtck").string();
  Train(session, ds, ckpt);
  EvalResult eval = Evaluate(session, ds);

  WriteFileOrThrow(fs::path(cfg.out_dir) / "history.csv", HistoryToCsv(session.history));
  QTableExportDoc doc = MakeQTableExport(session.kernels, cfg.train.loss.lambda,
                                         cfg.train.loss.lambda1, cfg.train.loss.c,
                                         cfg.train.seed);
  WriteQTableJson((fs::path(cfg.out_dir) / "qtables.json").string(), doc);

  std::vector<std::string> ids;
  for (size_t i = 0; i < eval.rate.images.size(); ++i) ids.push_back("val_" + std::to_string(i));
  WriteRateCsv((fs::path(cfg.out_dir) / "rate.csv").string(), eval.rate, ids);

  WriteFileOrThrow(fs::path(cfg.out_dir) / "summary.json",
                   SummaryJson(eval, &session).dump(2) + "\n");
  if (session_out != nullptr) *session_out = std::move(session);
  return eval;
}

}  // namespace

RunConfig LoadRunConfigJson(const std::string& path, const RunConfig& base) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  json j;
  f >> j;
  RunConfig cfg = base;
  FromJson(j, cfg);
  return cfg;
}

std::string RunConfigToJson(const RunConfig& cfg) { return ToJson(cfg).dump(2); }

int CmdTrain(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  EchoConfig(cfg);
  EvalResult eval = TrainOneRun(cfg);
  std::cout << "train: top1=" << eval.top1 << " mean_kb=" << eval.rate.mean_kb
            << " psnr=" << eval.mean_psnr << " ssim=" << eval.mean_ssim << "\n";
  return 0;
}

int CmdSweep(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  EchoConfig(cfg);

  enum class Axis { kLambda, kC, kQuality };
  Axis axis;
  std::vector<double> values;
  if (!cfg.sweep_lambdas.empty()) {
    axis = Axis::kLambda;
    values = cfg.sweep_lambdas;
  } else if (!cfg.sweep_cs.empty()) {
    axis = Axis::kC;
    values = cfg.sweep_cs;
  } else if (!cfg.sweep_qualities.empty()) {
    axis = Axis::kQuality;
    values = cfg.sweep_qualities;
  } else {
    throw std::invalid_argument("sweep: provide lambdas, cs, or qualities");
  }

  std::ostringstream csv;
  csv << "value,lambda,c,lambda1,mean_kb,accuracy,psnr,ssim,status\n";
  PlotSeries series;
  series.name = "sweep";
  series.color = {200, 40, 40};
  int failures = 0;
  for (double v : values) {
    RunConfig sub = cfg;
    char tag[64];
    std::snprintf(tag, sizeof tag, "%s_%g",
                  axis == Axis::kLambda ? "lambda" : (axis == Axis::kC ? "c" : "quality"), v);
    sub.out_dir = (fs::path(cfg.out_dir) / tag).string();
    switch (axis) {
      case Axis::kLambda:
        sub.train.loss.lambda = v;
        break;
      case Axis::kC:
        sub.train.loss.c = v;
        break;
      case Axis::kQuality:
        sub.train.mode = TrainMode::kBaseline;
        sub.train.baseline_quality = v;
        break;
    }
    try {
      EchoConfig(sub);
      EvalResult eval = TrainOneRun(sub);
      csv << v << "," << sub.train.loss.lambda << "," << sub.train.loss.c << ","
          << sub.train.loss.lambda1 << "," << eval.rate.mean_kb << "," << eval.top1 << ","
          << eval.mean_psnr << "," << eval.mean_ssim << ",ok\n";
      series.points.push_back({eval.rate.mean_kb, eval.top1});
      std::cout << "sweep " << tag << ": mean_kb=" << eval.rate.mean_kb
                << " top1=" << eval.top1 << "\n";
    } catch (const std::exception& e) {
      ++failures;
      csv << v << ",,,,,,,," << "failed: " << e.what() << "\n";
      std::cerr << "sweep " << tag << " failed: " << e.what() << "\n";
    }
  }
  WriteFileOrThrow(fs::path(cfg.out_dir) / "sweep.csv", csv.str());
  WriteLinePlot((fs::path(cfg.out_dir) / "rate_accuracy.png").string(), {series});
  return failures == static_cast<int>(values.size()) && !values.empty() ? 1 : 0;
}

int CmdRate(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  EchoConfig(cfg);
  Dataset ds = IngestDataset(cfg.dataset);
  if (ds.train_images.empty() || ds.val_images.empty()) {
    throw std::invalid_argument("rate: needs non-empty train and validation splits");
  }
  ColorTransform color = ColorTransform::Bt601();
  CompressionKernels kernels = KernelsFromSources(cfg, color);

  std::vector<const ImageRGB*> train_ptrs, val_ptrs;
  for (const auto& im : ds.train_images) train_ptrs.push_back(&im);
  for (const auto& im : ds.val_images) val_ptrs.push_back(&im);
  HuffmanCodec codec = BuildHuffmanTables(train_ptrs, color, kernels, cfg.train.huffman_sample,
                                          cfg.train.seed);
  RateReport report = MeasureRate(val_ptrs, color, kernels, codec);

  std::vector<std::string> ids;
  for (size_t i = 0; i < report.images.size(); ++i) ids.push_back("val_" + std::to_string(i));
  WriteRateCsv((fs::path(cfg.out_dir) / "rate.csv").string(), report, ids);

  json s;
  s["mean_kb"] = report.mean_kb;
  s["median_kb"] = report.median_kb;
  s["total_bits"] = report.TotalBits();
  s["escapes"] = report.escapes;
  s["warnings"] = report.warnings;
  WriteFileOrThrow(fs::path(cfg.out_dir) / "rate_summary.json", s.dump(2) + "\n");
  std::cout << "rate: mean_kb=" << report.mean_kb << " median_kb=" << report.median_kb << "\n";
  return 0;
}

int CmdEncode(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  EchoConfig(cfg);
  Dataset ds = IngestDataset(cfg.dataset);
  const bool use_val = !ds.val_images.empty();
  const std::vector<ImageRGB>& images = use_val ? ds.val_images : ds.train_images;
  if (images.empty()) throw std::invalid_argument("encode: empty dataset");

  ColorTransform color = ColorTransform::Bt601();
  CompressionKernels kernels = KernelsFromSources(cfg, color);

  std::vector<const ImageRGB*> train_ptrs;
  for (const auto& im : ds.train_images) train_ptrs.push_back(&im);
  HuffmanCodec codec =
      BuildHuffmanTables(train_ptrs.empty() ? std::vector<const ImageRGB*>{&images[0]} : train_ptrs,
                         color, kernels, cfg.train.huffman_sample, cfg.train.seed);

  const fs::path img_dir = fs::path(cfg.out_dir) / "images";
  fs::create_directories(img_dir);
  std::ostringstream csv;
  csv << "image_id,psnr,ssim,bits_y,bits_cb,bits_cr,bits_total\n";
  size_t written = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    CodecRun run = RunCodec(images[i], color, kernels);
    const std::string id = (use_val ? "val_" : "train_") + std::to_string(i);
    SaveImage((img_dir / (id + ".png")).string(), run.reconstructed);
    ++written;

    std::vector<const QuantizedImage*> one{&run.quantized};
    RateReport r = MeasureRateQuantized(one, codec);
    const double p = Psnr(images[i], run.reconstructed);
    const double s = Ssim(images[i], run.reconstructed);
    csv << id << "," << (std::isfinite(p) ? p : 999.0) << "," << s << ","
        << r.images[0].bits_y << "," << r.images[0].bits_cb << "," << r.images[0].bits_cr << ","
        << r.images[0].total() << "\n";
  }
  WriteFileOrThrow(fs::path(cfg.out_dir) / "encode_stats.csv", csv.str());
  std::cout << "encode: wrote " << written << " reconstructions\n";
  return written == images.size() ? 0 : 1;
}

int CmdExport(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (cfg.checkpoint.empty()) {
    std::cerr << "export: --checkpoint is required\n";
    return 2;
  }
  EchoConfig(cfg);
  ColorTransform color = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::Ones();
  LoadCodecParams(cfg.checkpoint, kernels, color);
  QTableExportDoc doc = MakeQTableExport(kernels, cfg.train.loss.lambda, cfg.train.loss.lambda1,
                                         cfg.train.loss.c, cfg.train.seed);
  WriteQTableJson((fs::path(cfg.out_dir) / "qtables.json").string(), doc);

  auto echo_table = [](const char* name, const QTable& q) {
    std::cout << name << ":\n";
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) std::cout << (c ? " " : "  ") << q[size_t(r * 8 + c)];
      std::cout << "\n";
    }
  };
  echo_table("y_qtable", doc.y);
  echo_table("cb_qtable", doc.cb);
  echo_table("cr_qtable", doc.cr);
  return 0;
}

int CmdIngestCheck(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  EchoConfig(cfg);
  Dataset ds = IngestDataset(cfg.dataset);
  const std::string summary = DatasetSummary(ds);
  WriteFileOrThrow(fs::path(cfg.out_dir) / "ingest_summary.txt", summary + "\n");
  std::cout << "ingest-check: " << summary << "\n";
  return 0;
}

}  // namespace qtune
