// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "benchmark/benchmark.h"
#include "qtune/dataset.h"
#include "qtune/jpeg_pipeline.h"
#include "qtune/rate.h"

namespace {

using namespace qtune;

DatasetSpec BenchData(int n) {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 10;
  spec.train_count = n;
  spec.val_count = 1;
  spec.seed = 17;
  return spec;
}

void BM_EncodeDecodeBatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Dataset ds = IngestDataset(BenchData(n));
  std::vector<const ImageRGB*> batch;
  for (const auto& im : ds.train_images) batch.push_back(&im);
  Tensor r, g, b;
  ImagesToPlaneTensors(batch, r, g, b);
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(50.0);

  for (auto _ : state) {
    Tape tape;
    PipelineContext ctx = BindPipeline(tape, ct, kernels, false, false);
    EncodeResult enc =
        EncodePipeline(tape, tape.Leaf(r), tape.Leaf(g), tape.Leaf(b), ctx);
    DecodeResult dec = DecodePipeline(tape, enc, ctx);
    benchmark::DoNotOptimize(dec.y.value().data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EncodeDecodeBatch)->Arg(16)->Arg(64);

void BM_RunCodecSingle(benchmark::State& state) {
  Dataset ds = IngestDataset(BenchData(1));
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(50.0);
  for (auto _ : state) {
    CodecRun run = RunCodec(ds.train_images[0], ct, kernels);
    benchmark::DoNotOptimize(run.reconstructed.r.v.data());
  }
}
BENCHMARK(BM_RunCodecSingle);

}  // namespace
