// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_JPEG_PIPELINE_H_
#define QTUNE_JPEG_PIPELINE_H_

#include <array>
#include <cstdint>
#include <vector>

#include "qtune/color_transform.h"
#include "qtune/image.h"
#include "qtune/ops.h"
#include "qtune/qtables.h"
#include "qtune/tape.h"

namespace qtune {

enum class Channel { kY = 0, kCb = 1, kCr = 2 };

// The three trainable 8x8 reciprocal quantization tables, entries in [0,1].
// A zero entry discards that frequency.
struct CompressionKernels {
  Param y, cb, cr;

  static CompressionKernels Ones();
  static CompressionKernels FromQTables(const QTable& qy, const QTable& qc_cb,
                                        const QTable& qc_cr);
  // Reciprocal standard Annex-K tables scaled for `quality`.
  static CompressionKernels StandardQuality(double quality);

  Param& table(int i) { return i == 0 ? y : (i == 1 ? cb : cr); }
  const Param& table(int i) const { return i == 0 ? y : (i == 1 ? cb : cr); }

  // Projects every entry to [0,1].
  void ClampTo01();
  double MinEntry() const;
  double MaxEntry() const;
};

// Per-channel grid of 8x8 coefficient blocks living on a tape.
// blocks: [batch*rows*cols, 8, 8] in raster order per image.
struct BlockGrid {
  Channel channel = Channel::kY;
  Val blocks;
  int batch = 0;
  int rows = 0;
  int cols = 0;
};

enum class RoundMode {
  kRound,         // true rounding in the forward pass (STE gradients)
  kIdentity,      // smooth surrogate; rounding skipped
  kFrozenOffset,  // adds fixed residuals captured from a previous kRound pass
};

struct PipelineOptions {
  RoundMode round_mode = RoundMode::kRound;
  // Residuals from EncodeResult::round_offsets of a base pass; required for
  // kFrozenOffset.
  const std::array<Tensor, 3>* frozen_offsets = nullptr;
};

// Parameters bound onto the working tape.
struct PipelineContext {
  Val ct_matrix, ct_offset;
  Val qy, qcb, qcr;
  Val q(int i) const { return i == 0 ? qy : (i == 1 ? qcb : qcr); }
};

PipelineContext BindPipeline(Tape& tape, ColorTransform& ct, CompressionKernels& kernels,
                             bool train_color, bool train_kernels);

struct EncodeResult {
  BlockGrid y, cb, cr;
  int plane_h = 0, plane_w = 0;  // padded luma plane dims
  // round(x) - x residuals per channel, captured when round_mode == kRound.
  std::array<Tensor, 3> round_offsets;
  const BlockGrid& grid(int i) const { return i == 0 ? y : (i == 1 ? cb : cr); }
};

// r,g,b: [N,H,W] leaves with samples in [0,255]; H, W multiples of 16.
// Applies color transform, -128 level shift, 4:2:0 subsampling (2x2 box
// mean), blockwise DCT and quantization by the bound kernels.
EncodeResult EncodePipeline(Tape& tape, Val r, Val g, Val b, const PipelineContext& ctx,
                            const PipelineOptions& opts = {});

struct DecodeResult {
  // Reconstructed level-shifted YCbCr planes, each [N,H,W] (chroma upsampled).
  Val y, cb, cr;
};

// Dequantization, blockwise IDCT, bilinear chroma upsampling.
DecodeResult DecodePipeline(Tape& tape, const EncodeResult& enc, const PipelineContext& ctx);

// [N,3,H,W] classifier input from reconstructed planes, scaled to ~[-1,1].
Val StackPlanes(Val y, Val cb, Val cr);

// Quantized DCT coefficient maps for the DCT-domain classifier:
// {Y:[N,64,by,bx], Cb:[N,64,by/2,bx/2], Cr: same as Cb}.
std::array<Val, 3> CoeffMaps(const EncodeResult& enc);

// Integer coefficients of one image extracted from an encode pass.
struct QuantizedChannel {
  Channel channel = Channel::kY;
  int rows = 0, cols = 0;
  std::vector<std::array<int16_t, 64>> blocks;  // raster order
};
struct QuantizedImage {
  QuantizedChannel y, cb, cr;
  const QuantizedChannel& channel(int i) const { return i == 0 ? y : (i == 1 ? cb : cr); }
};

QuantizedImage ExtractQuantized(const EncodeResult& enc, int image_index);

// Plain single-image round trip: pad, encode, decode, crop back, clamp.
struct CodecRun {
  QuantizedImage quantized;
  ImageRGB reconstructed;
};
CodecRun RunCodec(const ImageRGB& img, ColorTransform& ct, CompressionKernels& kernels);

// Batched plane tensors from images (all images must share dimensions).
void ImagesToPlaneTensors(const std::vector<const ImageRGB*>& images, Tensor& r, Tensor& g,
                          Tensor& b);

}  // namespace qtune

#endif  // QTUNE_JPEG_PIPELINE_H_
