// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qtune/metrics.h"

namespace qtune {

using namespace ops;

namespace {
constexpr double kNotMeasured = std::numeric_limits<double>::quiet_NaN();
}

HistoryRow::HistoryRow()
    : val_acc(kNotMeasured), mean_kb(kNotMeasured), psnr(kNotMeasured), ssim(kNotMeasured) {}

void TrainConfig::Validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (mode == TrainMode::kJoint) {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  } else if (alternations < 1) {
    throw std::invalid_argument("TrainConfig: alternations must be >= 1");
  }
  for (size_t i = 1; i < milestones.size(); ++i) {
    if (milestones[i].at <= milestones[i - 1].at) {
      throw std::invalid_argument("TrainConfig: milestones must be strictly increasing");
    }
  }
  for (double lr : {lr_classifier, lr_kernels, lr_color}) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
      throw std::invalid_argument("TrainConfig: learning rates must be finite and >= 0");
    }
  }
  loss.Validate();
}

double LrAt(double base, const std::vector<Milestone>& milestones, int position) {
  if (position < 0) throw std::invalid_argument("LrAt: position must be >= 0");
  double scale = 1.0;
  for (const Milestone& m : milestones) {
    if (position >= m.at) scale = m.scale;
  }
  return base * scale;
}

namespace {

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string HistoryToCsv(const std::vector<HistoryRow>& rows) {
  std::ostringstream os;
  os << "position,phase,loss,cla_loss,quan_loss,train_acc,val_acc,mean_kb,psnr,ssim,lr\n";
  for (const HistoryRow& r : rows) {
    os << r.position << "," << r.phase << "," << FormatDouble(r.loss) << ","
       << FormatDouble(r.cla_loss) << "," << FormatDouble(r.quan_loss) << ","
       << FormatDouble(r.train_acc) << "," << FormatDouble(r.val_acc) << ","
       << FormatDouble(r.mean_kb) << "," << FormatDouble(r.psnr) << "," << FormatDouble(r.ssim)
       << "," << FormatDouble(r.lr) << "\n";
  }
  return os.str();
}

std::vector<Param*> TrainSession::AllParams() {
  std::vector<Param*> out = classifier->Params();
  out.push_back(&kernels.y);
  out.push_back(&kernels.cb);
  out.push_back(&kernels.cr);
  out.push_back(&color.matrix);
  out.push_back(&color.offset);
  return out;
}

AdamState& TrainSession::AdamFor(Param& p) {
  auto it = adam.find(p.name);
  if (it == adam.end()) {
    it = adam.emplace(p.name, AdamState(p.value.shape())).first;
  }
  return it->second;
}

TrainSession CreateSession(const TrainConfig& cfg, const ClassifierConfig& cls_cfg) {
  cfg.Validate();
  cls_cfg.Validate();
  TrainSession s;
  s.cfg = cfg;
  if (s.cfg.mode == TrainMode::kBaseline) {
    // Baseline adapts the classifier only.
    s.cfg.lr_kernels = 0.0;
    s.cfg.lr_color = 0.0;
    s.cfg.train_color = false;
  }
  s.cls_cfg = cls_cfg;
  s.classifier = std::make_unique<Classifier>(cls_cfg);
  s.kernels = s.cfg.mode == TrainMode::kBaseline
                  ? CompressionKernels::StandardQuality(s.cfg.baseline_quality)
                  : CompressionKernels::Ones();
  s.color = ColorTransform::Bt601();
  s.rng = Rng(s.cfg.seed);
  return s;
}

namespace {

enum class Phase { kClassifier, kKernels, kJoint };

const char* PhaseName(Phase p) {
  switch (p) {
    case Phase::kClassifier:
      return "classifier";
    case Phase::kKernels:
      return "kernels";
    case Phase::kJoint:
      return "joint";
  }
  return "?";
}

struct ForwardOut {
  PipelineContext ctx;
  EncodeResult enc;
  DecodeResult dec;
  Val logits;
  bool has_dec = false;
};

ImageRGB FlipHorizontal(const ImageRGB& img) {
  ImageRGB out(img.height(), img.width());
  for (int c = 0; c < 3; ++c) {
    const Plane& src = img.plane(c);
    Plane& dst = out.plane(c);
    for (int y = 0; y < src.h; ++y) {
      for (int x = 0; x < src.w; ++x) dst.at(y, x) = src.at(y, src.w - 1 - x);
    }
  }
  return out;
}

ImageRGB RandomCrop(const ImageRGB& img, Rng& rng, int pad) {
  const int h = img.height(), w = img.width();
  ImageRGB padded(h + 2 * pad, w + 2 * pad);
  for (int c = 0; c < 3; ++c) {
    padded.plane(c) = PadPlane(img.plane(c), h + 2 * pad, w + 2 * pad);
  }
  const int dy = static_cast<int>(rng.NextBelow(static_cast<uint64_t>(2 * pad + 1)));
  const int dx = static_cast<int>(rng.NextBelow(static_cast<uint64_t>(2 * pad + 1)));
  ImageRGB out(h, w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.plane(c).at(y, x) = padded.plane(c).at(y + dy, x + dx);
    }
  }
  return out;
}

// Builds the full differentiable graph for one batch.
ForwardOut BuildForward(TrainSession& s, Tape& tape, const std::vector<const ImageRGB*>& batch,
                        bool train_cls, bool train_codec, bool want_decode) {
  std::vector<ImageRGB> padded_storage;
  std::vector<const ImageRGB*> imgs = batch;
  const int h0 = batch[0]->height(), w0 = batch[0]->width();
  if (h0 % 16 != 0 || w0 % 16 != 0) {
    padded_storage.reserve(batch.size());
    imgs.clear();
    for (const ImageRGB* im : batch) {
      padded_storage.push_back(PadToMultiple(*im, 16));
      imgs.push_back(&padded_storage.back());
    }
  }
  Tensor r, g, b;
  ImagesToPlaneTensors(imgs, r, g, b);

  ForwardOut out;
  out.ctx = BindPipeline(tape, s.color, s.kernels, train_codec && s.cfg.train_color, train_codec);
  Val rv = tape.Leaf(std::move(r)), gv = tape.Leaf(std::move(g)), bv = tape.Leaf(std::move(b));
  out.enc = EncodePipeline(tape, rv, gv, bv, out.ctx);

  if (s.cls_cfg.input_mode == InputMode::kPixel) {
    out.dec = DecodePipeline(tape, out.enc, out.ctx);
    out.has_dec = true;
    Val input = StackPlanes(out.dec.y, out.dec.cb, out.dec.cr);
    out.logits = s.classifier->ForwardPixels(tape, input, train_cls);
  } else {
    out.logits = s.classifier->ForwardCoeffs(tape, CoeffMaps(out.enc), train_cls);
    if (want_decode) {
      out.dec = DecodePipeline(tape, out.enc, out.ctx);
      out.has_dec = true;
    }
  }
  return out;
}

struct BatchStats {
  double loss = 0.0, cla = 0.0, quan = 0.0, acc = 0.0;
};

BatchStats TrainBatch(TrainSession& s, const std::vector<const ImageRGB*>& batch,
                      const std::vector<int>& labels, Phase phase, int position) {
  const bool train_cls = phase != Phase::kKernels;
  const bool train_codec =
      phase != Phase::kClassifier && s.cfg.mode != TrainMode::kBaseline;

  for (Param* p : s.AllParams()) p->ZeroGrad();

  Tape tape;
  ForwardOut fwd = BuildForward(s, tape, batch, train_cls, train_codec, false);
  Val ce = CrossEntropy(fwd.logits, labels);
  std::array<Val, 3> kvals{fwd.ctx.qy, fwd.ctx.qcb, fwd.ctx.qcr};
  Val quan = QuanPenalty(kvals, s.cfg.loss);
  Val total = TotalLoss(ce, quan, s.cfg.loss);

  BatchStats st;
  st.loss = total.value().ScalarValue();
  st.cla = ce.value().ScalarValue();
  st.quan = quan.value().ScalarValue();
  st.acc = TopkAccuracy(fwd.logits.value(), labels, 1);
  if (!std::isfinite(st.loss)) {
    throw std::runtime_error("training aborted: non-finite loss at step " +
                             std::to_string(s.global_step));
  }

  tape.Backward(total.id);
  tape.HarvestParamGrads();

  const bool step_cls = train_cls && s.cfg.lr_classifier > 0.0;
  const bool step_codec = train_codec;
  if (step_cls) {
    const double lr = LrAt(s.cfg.lr_classifier, s.cfg.milestones, position);
    for (Param* p : s.classifier->Params()) {
      if (!AdamStep(*p, s.AdamFor(*p), lr)) {
        s.warnings.push_back("non-finite gradient skipped: " + p->name + " step " +
                             std::to_string(s.global_step));
      }
    }
  }
  if (step_codec) {
    std::vector<Param*> group{&s.kernels.y, &s.kernels.cb, &s.kernels.cr};
    if (s.cfg.train_color) {
      group.push_back(&s.color.matrix);
      group.push_back(&s.color.offset);
    }
    if (s.cfg.clip_norm > 0.0) ClipGradNorm(group, s.cfg.clip_norm);
    if (s.cfg.lr_kernels > 0.0) {
      const double lr = LrAt(s.cfg.lr_kernels, s.cfg.milestones, position);
      for (Param* p : {&s.kernels.y, &s.kernels.cb, &s.kernels.cr}) {
        if (!AdamStep(*p, s.AdamFor(*p), lr)) {
          s.warnings.push_back("non-finite gradient skipped: " + p->name + " step " +
                               std::to_string(s.global_step));
        }
      }
      s.kernels.ClampTo01();
    }
    if (s.cfg.train_color && s.cfg.lr_color > 0.0) {
      const double lr = LrAt(s.cfg.lr_color, s.cfg.milestones, position);
      for (Param* p : {&s.color.matrix, &s.color.offset}) {
        if (!AdamStep(*p, s.AdamFor(*p), lr)) {
          s.warnings.push_back("non-finite gradient skipped: " + p->name + " step " +
                               std::to_string(s.global_step));
        }
      }
    }
  }
  ++s.global_step;
  return st;
}

BatchStats RunEpoch(TrainSession& s, const Dataset& data, Phase phase, int position) {
  const size_t n = data.train_images.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  s.rng.Shuffle(order);

  BatchStats sum;
  size_t count = 0;
  for (size_t start = 0; start < n; start += static_cast<size_t>(s.cfg.batch_size)) {
    const size_t end = std::min(n, start + static_cast<size_t>(s.cfg.batch_size));
    std::vector<ImageRGB> augmented;
    std::vector<const ImageRGB*> batch;
    std::vector<int> labels;
    augmented.reserve(end - start);
    for (size_t i = start; i < end; ++i) {
      const ImageRGB& img = data.train_images[order[i]];
      labels.push_back(data.train_labels[order[i]]);
      bool flip = s.cfg.augment_flip && s.rng.NextDouble() < 0.5;
      if (s.cfg.augment_crop) {
        augmented.push_back(flip ? FlipHorizontal(RandomCrop(img, s.rng, 4))
                                 : RandomCrop(img, s.rng, 4));
      } else if (flip) {
        augmented.push_back(FlipHorizontal(img));
      } else {
        augmented.push_back(img);
      }
    }
    for (const ImageRGB& im : augmented) batch.push_back(&im);

    BatchStats st = TrainBatch(s, batch, labels, phase, position);
    const double w = static_cast<double>(end - start);
    sum.loss += st.loss * w;
    sum.cla += st.cla * w;
    sum.quan += st.quan * w;
    sum.acc += st.acc * w;
    count += end - start;
  }
  if (count > 0) {
    sum.loss /= static_cast<double>(count);
    sum.cla /= static_cast<double>(count);
    sum.quan /= static_cast<double>(count);
    sum.acc /= static_cast<double>(count);
  }
  return sum;
}

struct ValMetrics {
  double top1 = 0.0, topk = 0.0, psnr = 0.0, ssim = 0.0;
  std::vector<QuantizedImage> quantized;
};

// Validation forward over `indices`; accumulates accuracy, reconstruction
// quality, and quantized streams for rate measurement.
ValMetrics EvalForward(TrainSession& s, const Dataset& data, const std::vector<size_t>& indices) {
  ValMetrics m;
  if (indices.empty()) return m;
  size_t correct1 = 0, correctk = 0;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  size_t psnr_count = 0;
  const size_t bs = static_cast<size_t>(s.cfg.batch_size);
  for (size_t start = 0; start < indices.size(); start += bs) {
    const size_t end = std::min(indices.size(), start + bs);
    std::vector<const ImageRGB*> batch;
    std::vector<int> labels;
    for (size_t i = start; i < end; ++i) {
      batch.push_back(&data.val_images[indices[i]]);
      labels.push_back(data.val_labels[indices[i]]);
    }
    Tape tape;
    ForwardOut fwd = BuildForward(s, tape, batch, false, false, true);
    const Tensor& logits = fwd.logits.value();
    correct1 += static_cast<size_t>(
        std::lround(TopkAccuracy(logits, labels, 1) * static_cast<double>(labels.size())));
    const int kk = std::min(s.cfg.topk, s.cls_cfg.num_classes);
    correctk += static_cast<size_t>(
        std::lround(TopkAccuracy(logits, labels, kk) * static_cast<double>(labels.size())));

    const int ph = fwd.enc.plane_h, pw = fwd.enc.plane_w;
    for (size_t i = start; i < end; ++i) {
      const int bi = static_cast<int>(i - start);
      m.quantized.push_back(ExtractQuantized(fwd.enc, bi));
      // Reconstruction quality.
      Plane py(ph, pw), pcb(ph, pw), pcr(ph, pw);
      const int64_t off = static_cast<int64_t>(bi) * ph * pw;
      std::copy_n(fwd.dec.y.value().data() + off, static_cast<int64_t>(ph) * pw, py.v.begin());
      std::copy_n(fwd.dec.cb.value().data() + off, static_cast<int64_t>(ph) * pw, pcb.v.begin());
      std::copy_n(fwd.dec.cr.value().data() + off, static_cast<int64_t>(ph) * pw, pcr.v.begin());
      ImageRGB recon = s.color.YCbCrToRgb(py, pcb, pcr);
      const ImageRGB& orig = data.val_images[indices[i]];
      if (recon.height() != orig.height() || recon.width() != orig.width()) {
        recon = CropImage(recon, orig.height(), orig.width());
      }
      const double p = Psnr(orig, recon);
      if (std::isfinite(p)) {
        psnr_sum += p;
        ++psnr_count;
      } else {
        psnr_sum += 99.0;  // identical reconstruction sentinel contribution
        ++psnr_count;
      }
      ssim_sum += Ssim(orig, recon);
    }
  }
  m.top1 = static_cast<double>(correct1) / static_cast<double>(indices.size());
  m.topk = static_cast<double>(correctk) / static_cast<double>(indices.size());
  m.psnr = psnr_count > 0 ? psnr_sum / static_cast<double>(psnr_count) : 0.0;
  m.ssim = ssim_sum / static_cast<double>(indices.size());
  return m;
}

// Cheap per-alternation measurement on fixed subsets.
void QuickEval(TrainSession& s, const Dataset& data, HistoryRow& row) {
  if (data.val_images.empty()) return;
  std::vector<size_t> val_idx;
  const size_t nval = std::min(data.val_images.size(),
                               static_cast<size_t>(std::max(1, s.cfg.quick_eval_images)));
  for (size_t i = 0; i < nval; ++i) val_idx.push_back(i);
  ValMetrics m = EvalForward(s, data, val_idx);
  row.val_acc = m.top1;
  row.psnr = m.psnr;
  row.ssim = m.ssim;

  const size_t ntrain = std::min(data.train_images.size(),
                                 static_cast<size_t>(std::max(1, s.cfg.quick_rate_train_images)));
  std::vector<const ImageRGB*> train_sub;
  for (size_t i = 0; i < ntrain; ++i) train_sub.push_back(&data.train_images[i]);
  HuffmanCodec codec = BuildHuffmanTables(train_sub, s.color, s.kernels,
                                          train_sub.size(), s.cfg.seed);
  std::vector<const QuantizedImage*> ptrs;
  for (const QuantizedImage& q : m.quantized) ptrs.push_back(&q);
  RateReport report = MeasureRateQuantized(ptrs, codec);
  row.mean_kb = report.mean_kb;
}

}  // namespace

void Train(TrainSession& s, const Dataset& data, const std::string& checkpoint_path,
           int run_limit) {
  if (data.train_images.empty()) throw std::invalid_argument("Train: empty training split");
  if (data.classes != s.cls_cfg.num_classes) {
    throw std::invalid_argument("Train: dataset classes (" + std::to_string(data.classes) +
                                ") do not match classifier config (" +
                                std::to_string(s.cls_cfg.num_classes) + ")");
  }

  const bool joint = s.cfg.mode == TrainMode::kJoint;
  int total_positions = joint ? s.cfg.epochs : s.cfg.alternations;
  if (run_limit > 0) total_positions = std::min(total_positions, s.next_position + run_limit);
  for (int pos = s.next_position; pos < total_positions; ++pos) {
    if (joint) {
      BatchStats st = RunEpoch(s, data, Phase::kJoint, pos);
      HistoryRow row;
      row.position = pos;
      row.phase = PhaseName(Phase::kJoint);
      row.loss = st.loss;
      row.cla_loss = st.cla;
      row.quan_loss = st.quan;
      row.train_acc = st.acc;
      row.lr = LrAt(s.cfg.lr_classifier, s.cfg.milestones, pos);
      QuickEval(s, data, row);
      s.history.push_back(row);
    } else {
      BatchStats c1 = RunEpoch(s, data, Phase::kClassifier, pos);
      BatchStats c2 = RunEpoch(s, data, Phase::kClassifier, pos);
      HistoryRow crow;
      crow.position = pos;
      crow.phase = PhaseName(Phase::kClassifier);
      crow.loss = 0.5 * (c1.loss + c2.loss);
      crow.cla_loss = 0.5 * (c1.cla + c2.cla);
      crow.quan_loss = 0.5 * (c1.quan + c2.quan);
      crow.train_acc = 0.5 * (c1.acc + c2.acc);
      crow.lr = LrAt(s.cfg.lr_classifier, s.cfg.milestones, pos);

      if (s.cfg.mode == TrainMode::kAlternating) {
        s.history.push_back(crow);
        BatchStats kst = RunEpoch(s, data, Phase::kKernels, pos);
        HistoryRow krow;
        krow.position = pos;
        krow.phase = PhaseName(Phase::kKernels);
        krow.loss = kst.loss;
        krow.cla_loss = kst.cla;
        krow.quan_loss = kst.quan;
        krow.train_acc = kst.acc;
        krow.lr = LrAt(s.cfg.lr_kernels, s.cfg.milestones, pos);
        QuickEval(s, data, krow);
        s.history.push_back(krow);
      } else {
        QuickEval(s, data, crow);
        s.history.push_back(crow);
      }
    }
    s.next_position = pos + 1;
    if (!checkpoint_path.empty()) SaveCheckpoint(checkpoint_path, s);
  }
}

EvalResult Evaluate(TrainSession& s, const Dataset& data) {
  if (data.val_images.empty()) throw std::invalid_argument("Evaluate: empty validation split");
  std::vector<size_t> idx(data.val_images.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  ValMetrics m = EvalForward(s, data, idx);

  std::vector<const ImageRGB*> train_ptrs;
  train_ptrs.reserve(data.train_images.size());
  for (const ImageRGB& im : data.train_images) train_ptrs.push_back(&im);
  HuffmanCodec codec =
      BuildHuffmanTables(train_ptrs, s.color, s.kernels, s.cfg.huffman_sample, s.cfg.seed);

  std::vector<const QuantizedImage*> ptrs;
  ptrs.reserve(m.quantized.size());
  for (const QuantizedImage& q : m.quantized) ptrs.push_back(&q);

  EvalResult out;
  out.rate = MeasureRateQuantized(ptrs, codec);
  out.top1 = m.top1;
  out.topk = m.topk;
  out.mean_psnr = m.psnr;
  out.mean_ssim = m.ssim;
  return out;
}

}  // namespace qtune
