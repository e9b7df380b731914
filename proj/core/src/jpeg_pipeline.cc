// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/jpeg_pipeline.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qtune {

using namespace ops;

CompressionKernels CompressionKernels::Ones() {
  CompressionKernels k;
  k.y = Param("kernels.y", Tensor({8, 8}, 1.0));
  k.cb = Param("kernels.cb", Tensor({8, 8}, 1.0));
  k.cr = Param("kernels.cr", Tensor({8, 8}, 1.0));
  return k;
}

CompressionKernels CompressionKernels::FromQTables(const QTable& qy, const QTable& qc_cb,
                                                   const QTable& qc_cr) {
  CompressionKernels k = Ones();
  k.y.value = KernelFromQTable(qy);
  k.cb.value = KernelFromQTable(qc_cb);
  k.cr.value = KernelFromQTable(qc_cr);
  return k;
}

CompressionKernels CompressionKernels::StandardQuality(double quality) {
  const QTable luma = ScaleQTable(StandardLumaQTable(), quality);
  const QTable chroma = ScaleQTable(StandardChromaQTable(), quality);
  return FromQTables(luma, chroma, chroma);
}

void CompressionKernels::ClampTo01() {
  for (int i = 0; i < 3; ++i) {
    Tensor& t = table(i).value;
    for (int64_t j = 0; j < t.size(); ++j) t[j] = std::clamp(t[j], 0.0, 1.0);
  }
}

double CompressionKernels::MinEntry() const {
  double m = table(0).value[0];
  for (int i = 0; i < 3; ++i) {
    const Tensor& t = table(i).value;
    for (int64_t j = 0; j < t.size(); ++j) m = std::min(m, t[j]);
  }
  return m;
}

double CompressionKernels::MaxEntry() const {
  double m = table(0).value[0];
  for (int i = 0; i < 3; ++i) {
    const Tensor& t = table(i).value;
    for (int64_t j = 0; j < t.size(); ++j) m = std::max(m, t[j]);
  }
  return m;
}

PipelineContext BindPipeline(Tape& tape, ColorTransform& ct, CompressionKernels& kernels,
                             bool train_color, bool train_kernels) {
  PipelineContext ctx;
  ctx.ct_matrix = tape.Bind(ct.matrix, train_color);
  ctx.ct_offset = tape.Bind(ct.offset, train_color);
  ctx.qy = tape.Bind(kernels.y, train_kernels);
  ctx.qcb = tape.Bind(kernels.cb, train_kernels);
  ctx.qcr = tape.Bind(kernels.cr, train_kernels);
  return ctx;
}

namespace {

// Quantize one channel's DCT blocks under the configured rounding mode.
Val Quantize(Tape& tape, Val dct_blocks, Val kernel, const PipelineOptions& opts, int chan,
             Tensor* offset_out) {
  Val scaled = QuantScale(dct_blocks, kernel);
  switch (opts.round_mode) {
    case RoundMode::kRound: {
      Val rounded = RoundSte(scaled);
      if (offset_out != nullptr) {
        const Tensor& before = scaled.value();
        const Tensor& after = rounded.value();
        Tensor off(before.shape());
        for (int64_t i = 0; i < off.size(); ++i) off[i] = after[i] - before[i];
        *offset_out = std::move(off);
      }
      return rounded;
    }
    case RoundMode::kIdentity:
      return scaled;
    case RoundMode::kFrozenOffset: {
      if (opts.frozen_offsets == nullptr) {
        throw std::invalid_argument("EncodePipeline: kFrozenOffset requires frozen_offsets");
      }
      Val off = tape.Leaf((*opts.frozen_offsets)[static_cast<size_t>(chan)], false);
      return Add(scaled, off);
    }
  }
  throw std::logic_error("unreachable");
}

BlockGrid MakeGrid(Channel ch, Val blocks, int batch, int rows, int cols) {
  BlockGrid g;
  g.channel = ch;
  g.blocks = blocks;
  g.batch = batch;
  g.rows = rows;
  g.cols = cols;
  return g;
}

}  // namespace

EncodeResult EncodePipeline(Tape& tape, Val r, Val g, Val b, const PipelineContext& ctx,
                            const PipelineOptions& opts) {
  const Tensor& rv = r.value();
  if (rv.rank() != 3) {
    throw std::invalid_argument("EncodePipeline: planes must be [N,H,W], got " + rv.ShapeStr());
  }
  const int n = rv.dim(0), h = rv.dim(1), w = rv.dim(2);
  if (h % 16 != 0 || w % 16 != 0) {
    throw std::invalid_argument("EncodePipeline: plane dims must be multiples of 16 (pad first)");
  }

  // Color transform + level shift.
  Val y = AddScalar(Linear3(r, g, b, ctx.ct_matrix, ctx.ct_offset, 0), -128.0);
  Val cb = AddScalar(Linear3(r, g, b, ctx.ct_matrix, ctx.ct_offset, 1), -128.0);
  Val cr = AddScalar(Linear3(r, g, b, ctx.ct_matrix, ctx.ct_offset, 2), -128.0);

  // 4:2:0 subsampling.
  Val cb_s = AvgPool2(cb);
  Val cr_s = AvgPool2(cr);

  Val fy = BlockDct(Blockify8(y));
  Val fcb = BlockDct(Blockify8(cb_s));
  Val fcr = BlockDct(Blockify8(cr_s));

  EncodeResult out;
  out.plane_h = h;
  out.plane_w = w;
  const bool capture = opts.round_mode == RoundMode::kRound;
  Val qy = Quantize(tape, fy, ctx.qy, opts, 0, capture ? &out.round_offsets[0] : nullptr);
  Val qcb = Quantize(tape, fcb, ctx.qcb, opts, 1, capture ? &out.round_offsets[1] : nullptr);
  Val qcr = Quantize(tape, fcr, ctx.qcr, opts, 2, capture ? &out.round_offsets[2] : nullptr);

  out.y = MakeGrid(Channel::kY, qy, n, h / 8, w / 8);
  out.cb = MakeGrid(Channel::kCb, qcb, n, h / 16, w / 16);
  out.cr = MakeGrid(Channel::kCr, qcr, n, h / 16, w / 16);
  return out;
}

DecodeResult DecodePipeline(Tape& tape, const EncodeResult& enc, const PipelineContext& ctx) {
  (void)tape;
  const int n = enc.y.batch;
  const int h = enc.plane_h, w = enc.plane_w;

  Val ry = BlockIdct(DequantScale(enc.y.blocks, ctx.qy));
  Val rcb = BlockIdct(DequantScale(enc.cb.blocks, ctx.qcb));
  Val rcr = BlockIdct(DequantScale(enc.cr.blocks, ctx.qcr));

  DecodeResult out;
  out.y = Deblockify8(ry, {n, h, w});
  out.cb = BilinearUp2(Deblockify8(rcb, {n, h / 2, w / 2}));
  out.cr = BilinearUp2(Deblockify8(rcr, {n, h / 2, w / 2}));
  return out;
}

Val StackPlanes(Val y, Val cb, Val cr) {
  const Tensor& v = y.value();
  const int n = v.dim(0), h = v.dim(1), w = v.dim(2);
  std::vector<Val> chans;
  chans.push_back(Reshape(y, {n, 1, h, w}));
  chans.push_back(Reshape(cb, {n, 1, h, w}));
  chans.push_back(Reshape(cr, {n, 1, h, w}));
  // Level-shifted planes span roughly [-128,127]; bring them near [-1,1].
  return MulScalar(Concat(chans, 1), 1.0 / 128.0);
}

std::array<Val, 3> CoeffMaps(const EncodeResult& enc) {
  std::array<Val, 3> maps;
  for (int i = 0; i < 3; ++i) {
    const BlockGrid& g = enc.grid(i);
    maps[static_cast<size_t>(i)] = BlocksToCoeffMap(g.blocks, g.batch, g.rows, g.cols);
  }
  return maps;
}

QuantizedImage ExtractQuantized(const EncodeResult& enc, int image_index) {
  QuantizedImage out;
  for (int i = 0; i < 3; ++i) {
    const BlockGrid& g = enc.grid(i);
    QuantizedChannel& qc = i == 0 ? out.y : (i == 1 ? out.cb : out.cr);
    qc.channel = g.channel;
    qc.rows = g.rows;
    qc.cols = g.cols;
    qc.blocks.resize(static_cast<size_t>(g.rows) * g.cols);
    const Tensor& v = g.blocks.value();
    const int64_t per_image = static_cast<int64_t>(g.rows) * g.cols * 64;
    const double* base = v.data() + static_cast<int64_t>(image_index) * per_image;
    for (size_t bi = 0; bi < qc.blocks.size(); ++bi) {
      for (int k = 0; k < 64; ++k) {
        qc.blocks[bi][static_cast<size_t>(k)] =
            static_cast<int16_t>(std::lround(base[static_cast<int64_t>(bi) * 64 + k]));
      }
    }
  }
  return out;
}

CodecRun RunCodec(const ImageRGB& img, ColorTransform& ct, CompressionKernels& kernels) {
  const int orig_h = img.height(), orig_w = img.width();
  if (orig_h < 16 || orig_w < 16) {
    throw std::invalid_argument("RunCodec: image must be at least 16x16");
  }
  const ImageRGB padded = PadToMultiple(img, 16);
  const int h = padded.height(), w = padded.width();

  Tensor r({1, h, w}), g({1, h, w}), b({1, h, w});
  std::copy(padded.r.v.begin(), padded.r.v.end(), r.data());
  std::copy(padded.g.v.begin(), padded.g.v.end(), g.data());
  std::copy(padded.b.v.begin(), padded.b.v.end(), b.data());

  Tape tape;
  PipelineContext ctx = BindPipeline(tape, ct, kernels, false, false);
  Val rv = tape.Leaf(std::move(r)), gv = tape.Leaf(std::move(g)), bv = tape.Leaf(std::move(b));
  EncodeResult enc = EncodePipeline(tape, rv, gv, bv, ctx);
  DecodeResult dec = DecodePipeline(tape, enc, ctx);

  CodecRun run;
  run.quantized = ExtractQuantized(enc, 0);

  Plane py(h, w), pcb(h, w), pcr(h, w);
  std::copy(dec.y.value().values().begin(), dec.y.value().values().end(), py.v.begin());
  std::copy(dec.cb.value().values().begin(), dec.cb.value().values().end(), pcb.v.begin());
  std::copy(dec.cr.value().values().begin(), dec.cr.value().values().end(), pcr.v.begin());
  ImageRGB recon = ct.YCbCrToRgb(py, pcb, pcr);
  run.reconstructed = (h != orig_h || w != orig_w) ? CropImage(recon, orig_h, orig_w) : recon;
  return run;
}

void ImagesToPlaneTensors(const std::vector<const ImageRGB*>& images, Tensor& r, Tensor& g,
                          Tensor& b) {
  if (images.empty()) throw std::invalid_argument("ImagesToPlaneTensors: empty batch");
  const int h = images[0]->height(), w = images[0]->width();
  const int n = static_cast<int>(images.size());
  r = Tensor({n, h, w});
  g = Tensor({n, h, w});
  b = Tensor({n, h, w});
  const int64_t hw = static_cast<int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    if (images[static_cast<size_t>(i)]->height() != h ||
        images[static_cast<size_t>(i)]->width() != w) {
      throw std::invalid_argument("ImagesToPlaneTensors: image dims differ within batch");
    }
    std::copy(images[static_cast<size_t>(i)]->r.v.begin(), images[static_cast<size_t>(i)]->r.v.end(),
              r.data() + i * hw);
    std::copy(images[static_cast<size_t>(i)]->g.v.begin(), images[static_cast<size_t>(i)]->g.v.end(),
              g.data() + i * hw);
    std::copy(images[static_cast<size_t>(i)]->b.v.begin(), images[static_cast<size_t>(i)]->b.v.end(),
              b.data() + i * hw);
  }
}

}  // namespace qtune
