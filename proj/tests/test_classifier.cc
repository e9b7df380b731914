// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <cmath>
#include <map>
#include <stdexcept>

#include "doctest.h"
#include "qtune/classifier.h"
#include "qtune/dataset.h"
#include "qtune/jpeg_pipeline.h"
#include "qtune/losses.h"
#include "qtune/optim.h"
#include "testutil.h"

using namespace qtune;
using namespace qtune::ops;
using testutil::RandomTensor;

namespace {

ClassifierConfig SmallPixelCfg(int classes = 10) {
  ClassifierConfig cfg;
  cfg.input_mode = InputMode::kPixel;
  cfg.num_classes = classes;
  cfg.width_multiplier = 1;
  cfg.blocks_per_group = 1;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("pixel classifier: logits shape contract on 32x32 input") {
  Classifier net(SmallPixelCfg(10));
  Tape t;
  Rng rng(90);
  Val x = t.Leaf(RandomTensor({5, 3, 32, 32}, rng));
  Val logits = net.ForwardPixels(t, x, false);
  CHECK(logits.value().shape() == std::vector<int>{5, 10});
}

TEST_CASE("dct classifier: chroma branches upsample to the luma grid") {
  ClassifierConfig cfg = SmallPixelCfg(7);
  cfg.input_mode = InputMode::kDct;
  Classifier net(cfg);
  Tape t;
  Rng rng(91);
  // Y grid 4x4 blocks, chroma 2x2 blocks.
  std::array<Val, 3> maps{t.Leaf(RandomTensor({3, 64, 4, 4}, rng, 60.0)),
                          t.Leaf(RandomTensor({3, 64, 2, 2}, rng, 30.0)),
                          t.Leaf(RandomTensor({3, 64, 2, 2}, rng, 30.0))};
  Val logits = net.ForwardCoeffs(t, maps, false);
  CHECK(logits.value().shape() == std::vector<int>{3, 7});
}

TEST_CASE("fresh classifier on random input: cross entropy near ln C") {
  const int classes = 10;
  Classifier net(SmallPixelCfg(classes));
  Tape t;
  Rng rng(92);
  Val x = t.Leaf(RandomTensor({40, 3, 32, 32}, rng));
  Val logits = net.ForwardPixels(t, x, false);
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) labels.push_back(static_cast<int>(rng.NextBelow(classes)));
  const double ce = CrossEntropy(logits, labels).value().ScalarValue();
  const double lnc = std::log(static_cast<double>(classes));
  CHECK(ce > 0.8 * lnc);
  CHECK(ce < 1.2 * lnc);
}

TEST_CASE("duplicated input rows give duplicated logit rows") {
  Classifier net(SmallPixelCfg(4));
  Tape t;
  Rng rng(93);
  Tensor one = RandomTensor({1, 3, 32, 32}, rng);
  Tensor two({2, 3, 32, 32});
  std::copy(one.values().begin(), one.values().end(), two.data());
  std::copy(one.values().begin(), one.values().end(), two.data() + one.size());
  Tensor logits = net.ForwardPixels(t, t.Leaf(two), false).value();
  for (int j = 0; j < 4; ++j) {
    CHECK(logits[j] == logits[4 + j]);
  }
}

TEST_CASE("zero-width batch gives zero-row logits") {
  Classifier net(SmallPixelCfg(4));
  Tape t;
  Val x = t.Leaf(Tensor({0, 3, 32, 32}));
  Tensor logits = net.ForwardPixels(t, x, false).value();
  CHECK(logits.dim(0) == 0);
  CHECK(logits.dim(1) == 4);
}

TEST_CASE("softmax is shift invariant") {
  Rng rng(94);
  Tensor logits = RandomTensor({3, 6}, rng, 3.0);
  Tensor shifted = logits;
  for (int r = 0; r < 3; ++r) {
    for (int j = 0; j < 6; ++j) shifted[r * 6 + j] += 17.5;
  }
  Tensor p1 = SoftmaxRows(logits);
  Tensor p2 = SoftmaxRows(shifted);
  for (int64_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-12));
  }
}

TEST_CASE("topk accuracy anchors") {
  Tensor perfect = Tensor::FromValues({2, 3}, {9.0, 0.0, 0.0, 0.0, 9.0, 0.0});
  CHECK(TopkAccuracy(perfect, {0, 1}, 1) == doctest::Approx(1.0));
  Tensor any = Tensor::FromValues({2, 3}, {1.0, 2.0, 3.0, 3.0, 2.0, 1.0});
  CHECK(TopkAccuracy(any, {0, 2}, 3) == doctest::Approx(1.0));
  Tensor row = Tensor::FromValues({1, 3}, {2.0, 1.0, 0.0});
  CHECK(TopkAccuracy(row, {1}, 2) == doctest::Approx(1.0));
  CHECK(TopkAccuracy(row, {2}, 2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(TopkAccuracy(row, {5}, 1), std::invalid_argument);
}

TEST_CASE("parameter count is deterministic and seeds reproduce weights") {
  ClassifierConfig cfg = SmallPixelCfg(10);
  Classifier a(cfg), b(cfg);
  CHECK(a.ParamCount() == b.ParamCount());
  CHECK(a.ParamCount() > 0);
  MESSAGE("pixel k=1 B=1 parameter count: ", a.ParamCount());
  auto pa = a.Params();
  auto pb = b.Params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->value.size() == pb[i]->value.size());
    for (int64_t j = 0; j < pa[i]->value.size(); ++j) {
      CHECK(pa[i]->value[j] == pb[i]->value[j]);
    }
  }
  ClassifierConfig cfg2 = cfg;
  cfg2.width_multiplier = 2;
  Classifier c(cfg2);
  CHECK(c.ParamCount() > a.ParamCount());
}

TEST_CASE("classifiers accept pipeline tensors with no reshaping") {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 4;
  spec.train_count = 6;
  spec.val_count = 1;
  spec.seed = 95;
  Dataset ds = IngestDataset(spec);
  std::vector<const ImageRGB*> batch;
  for (const auto& im : ds.train_images) batch.push_back(&im);
  Tensor r, g, b;
  ImagesToPlaneTensors(batch, r, g, b);

  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(50.0);

  Tape t;
  PipelineContext ctx = BindPipeline(t, ct, kernels, false, false);
  Val rv = t.Leaf(r), gv = t.Leaf(g), bv = t.Leaf(b);
  EncodeResult enc = EncodePipeline(t, rv, gv, bv, ctx);

  // Pixel path.
  DecodeResult dec = DecodePipeline(t, enc, ctx);
  Classifier pixel_net(SmallPixelCfg(4));
  Val px_logits = pixel_net.ForwardPixels(t, StackPlanes(dec.y, dec.cb, dec.cr), false);
  CHECK(px_logits.value().shape() == std::vector<int>{6, 4});

  // DCT path.
  ClassifierConfig dcfg = SmallPixelCfg(4);
  dcfg.input_mode = InputMode::kDct;
  Classifier dct_net(dcfg);
  Val dct_logits = dct_net.ForwardCoeffs(t, CoeffMaps(enc), false);
  CHECK(dct_logits.value().shape() == std::vector<int>{6, 4});
}

TEST_CASE("classifier training decreases cross entropy over 5 epochs with codec frozen") {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 5;
  spec.train_count = 500;
  spec.val_count = 1;
  spec.seed = 96;
  Dataset ds = IngestDataset(spec);

  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(50.0);
  ClassifierConfig cfg = SmallPixelCfg(5);
  Classifier net(cfg);
  std::map<std::string, AdamState> adam;
  Rng order_rng(97);

  std::vector<double> epoch_ce;
  const int batch_size = 100;
  for (int epoch = 0; epoch < 5; ++epoch) {
    std::vector<size_t> order(ds.train_images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.Shuffle(order);
    double ce_sum = 0.0;
    int count = 0;
    for (size_t start = 0; start < order.size(); start += batch_size) {
      const size_t end = std::min(order.size(), start + batch_size);
      std::vector<const ImageRGB*> batch;
      std::vector<int> labels;
      for (size_t i = start; i < end; ++i) {
        batch.push_back(&ds.train_images[order[i]]);
        labels.push_back(ds.train_labels[order[i]]);
      }
      Tensor r, g, b;
      ImagesToPlaneTensors(batch, r, g, b);
      for (Param* p : net.Params()) p->ZeroGrad();

      Tape t;
      PipelineContext ctx = BindPipeline(t, ct, kernels, false, false);  // codec frozen
      EncodeResult enc = EncodePipeline(t, t.Leaf(std::move(r)), t.Leaf(std::move(g)),
                                        t.Leaf(std::move(b)), ctx);
      DecodeResult dec = DecodePipeline(t, enc, ctx);
      Val logits = net.ForwardPixels(t, StackPlanes(dec.y, dec.cb, dec.cr), true);
      Val ce = CrossEntropy(logits, labels);
      ce_sum += ce.value().ScalarValue() * static_cast<double>(end - start);
      count += static_cast<int>(end - start);
      t.Backward(ce.id);
      t.HarvestParamGrads();
      for (Param* p : net.Params()) {
        auto it = adam.find(p->name);
        if (it == adam.end()) it = adam.emplace(p->name, AdamState(p->value.shape())).first;
        AdamStep(*p, it->second, 0.002);
      }
    }
    epoch_ce.push_back(ce_sum / count);
    // Frozen codec: kernels must be bit-identical throughout.
    CompressionKernels fresh = CompressionKernels::StandardQuality(50.0);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 64; ++j) {
        CHECK(kernels.table(i).value[j] == fresh.table(i).value[j]);
      }
    }
  }
  for (size_t e = 1; e < epoch_ce.size(); ++e) {
    CHECK(epoch_ce[e] < epoch_ce[e - 1]);
  }
}
