// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <cmath>

#include "doctest.h"
#include "qtune/color_transform.h"
#include "qtune/jpeg_pipeline.h"
#include "qtune/ops.h"
#include "qtune/qtables.h"
#include "testutil.h"

using namespace qtune;
using namespace qtune::ops;
using testutil::RandomTensor;

namespace {

// Brute-force orthonormal DCT-II definition, four loops.
void NaiveDct8(const double* x, double* out) {
  const double pi = 3.14159265358979323846;
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      const double au = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      const double av = v == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      double s = 0.0;
      for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
          s += x[i * 8 + j] * std::cos((2 * i + 1) * u * pi / 16.0) *
               std::cos((2 * j + 1) * v * pi / 16.0);
        }
      }
      out[u * 8 + v] = au * av * s;
    }
  }
}

double Norm2(const Tensor& t) {
  double s = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("color transform: gray and black anchors") {
  ColorTransform ct = ColorTransform::Bt601();
  ImageRGB gray(16, 16);
  for (int c = 0; c < 3; ++c) gray.plane(c) = Plane(16, 16, 128.0);
  Plane y, cb, cr;
  ct.RgbToYCbCr(gray, y, cb, cr);
  CHECK(y.at(0, 0) == doctest::Approx(0.0).epsilon(1e-9));   // 128 - 128
  CHECK(cb.at(0, 0) == doctest::Approx(0.0).epsilon(1e-9));  // 128 + 0 - 128
  CHECK(cr.at(0, 0) == doctest::Approx(0.0).epsilon(1e-9));

  ImageRGB black(16, 16);
  ct.RgbToYCbCr(black, y, cb, cr);
  CHECK(y.at(3, 5) == doctest::Approx(-128.0));  // Y=0 pre-shift
  CHECK(cb.at(3, 5) == doctest::Approx(0.0));    // Cb=128 pre-shift
  CHECK(cr.at(3, 5) == doctest::Approx(0.0));
}

TEST_CASE("color transform: inverse of forward is identity") {
  ColorTransform ct = ColorTransform::Bt601();
  Rng rng(31);
  ImageRGB img(16, 16);
  for (int c = 0; c < 3; ++c) {
    for (double& v : img.plane(c).v) v = 20.0 + 215.0 * rng.NextDouble();
  }
  Plane y, cb, cr;
  ct.RgbToYCbCr(img, y, cb, cr);
  ImageRGB back = ct.YCbCrToRgb(y, cb, cr);
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < img.plane(c).v.size(); ++i) {
      CHECK(std::fabs(back.plane(c).v[i] - img.plane(c).v[i]) < 1e-9);
    }
  }
}

TEST_CASE("subsample: 2x2 box mean values") {
  Tape t;
  Val x = t.Leaf(Tensor::FromValues({2, 2}, {0.0, 0.0, 0.0, 4.0}));
  Tensor y = AvgPool2(x).value();
  CHECK(y.size() == 1);
  CHECK(y[0] == doctest::Approx(1.0));

  Val c = t.Leaf(Tensor({4, 4}, 7.5));
  Tensor yc = AvgPool2(c).value();
  for (int64_t i = 0; i < yc.size(); ++i) CHECK(yc[i] == doctest::Approx(7.5));

  // Gradient of sum(output) w.r.t. each input sample is 0.25.
  Tape t2;
  Val x2 = t2.Leaf(Tensor({4, 4}, 1.0), true);
  Val l = ReduceSum(AvgPool2(x2));
  t2.Backward(l.id);
  for (int i = 0; i < 16; ++i) CHECK(t2.grad(x2.id)[i] == doctest::Approx(0.25));
}

TEST_CASE("upsample: constant plane and down-up identity on constants") {
  Tape t;
  Val c = t.Leaf(Tensor({3, 5, 4}, 2.25));
  Tensor up = BilinearUp2(c).value();
  for (int64_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(2.25));
  Val down = AvgPool2(t.Leaf(up));
  for (int64_t i = 0; i < down.value().size(); ++i) {
    CHECK(down.value()[i] == doctest::Approx(2.25));
  }
}

TEST_CASE("blockify: geometry and exact round trip") {
  Rng rng(33);
  Tape t;
  Tensor plane = RandomTensor({16, 16}, rng, 100.0);
  Val p = t.Leaf(plane);
  Val blocks = Blockify8(p);
  CHECK(blocks.value().shape() == std::vector<int>{4, 8, 8});
  // Raster order: block 1 starts at column 8 of row 0.
  CHECK(blocks.value()[1 * 64 + 0] == plane[8]);
  // Block 2 starts at row 8, column 0.
  CHECK(blocks.value()[2 * 64 + 0] == plane[8 * 16]);

  Val back = Deblockify8(blocks, {16, 16});
  for (int64_t i = 0; i < plane.size(); ++i) CHECK(back.value()[i] == plane[i]);

  // 8x8 plane: single block equal to the plane.
  Tensor small = RandomTensor({8, 8}, rng);
  Val sp = t.Leaf(small);
  Tensor sb = Blockify8(sp).value();
  for (int i = 0; i < 64; ++i) CHECK(sb[i] == small[i]);
}

TEST_CASE("plane padding: 12x12 pads to 16x16 by edge replication and crops back") {
  Rng rng(34);
  ImageRGB img(12, 12);
  for (int c = 0; c < 3; ++c) {
    for (double& v : img.plane(c).v) v = 255.0 * rng.NextDouble();
  }
  ImageRGB padded = PadToMultiple(img, 16);
  CHECK(padded.height() == 16);
  CHECK(padded.width() == 16);
  CHECK(padded.r.at(15, 15) == img.r.at(11, 11));  // replicated corner
  CHECK(padded.r.at(0, 13) == img.r.at(0, 11));
  ImageRGB cropped = CropImage(padded, 12, 12);
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < img.plane(c).v.size(); ++i) {
      CHECK(cropped.plane(c).v[i] == img.plane(c).v[i]);
    }
  }
}

TEST_CASE("dct: constant blocks") {
  Tape t;
  // Level-shifted constant-128 block is all zero.
  Val zero = t.Leaf(Tensor({1, 8, 8}, 0.0));
  Tensor fz = BlockDct(zero).value();
  for (int i = 0; i < 64; ++i) CHECK(fz[i] == doctest::Approx(0.0));

  const double c = -37.25;
  Val cb = t.Leaf(Tensor({1, 8, 8}, c));
  Tensor fc = BlockDct(cb).value();
  CHECK(fc[0] == doctest::Approx(8.0 * c).epsilon(1e-12));
  for (int i = 1; i < 64; ++i) CHECK(std::fabs(fc[i]) < 1e-10);

  // F with only F(0,0)=8 inverts to the constant block 1.
  Tensor f({1, 8, 8}, 0.0);
  f[0] = 8.0;
  Tensor x = BlockIdct(t.Leaf(f)).value();
  for (int i = 0; i < 64; ++i) CHECK(x[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dct: matches the four-loop definition within 1e-10") {
  Rng rng(35);
  Tape t;
  Tensor blocks = RandomTensor({3, 8, 8}, rng, 128.0);
  Tensor got = BlockDct(t.Leaf(blocks)).value();
  double want[64];
  for (int b = 0; b < 3; ++b) {
    NaiveDct8(blocks.data() + b * 64, want);
    for (int i = 0; i < 64; ++i) {
      CHECK(std::fabs(got[b * 64 + i] - want[i]) < 1e-10);
    }
  }
}

TEST_CASE("dct: orthogonality, linearity, energy preservation") {
  Rng rng(36);
  Tape t;
  Tensor x = RandomTensor({4, 8, 8}, rng, 128.0);
  Tensor y = RandomTensor({4, 8, 8}, rng, 128.0);

  Val xv = t.Leaf(x), yv = t.Leaf(y);
  Tensor round_trip = BlockIdct(BlockDct(xv)).value();
  for (int64_t i = 0; i < x.size(); ++i) CHECK(std::fabs(round_trip[i] - x[i]) < 1e-6);

  const double a = 1.75, b = -0.4;
  Tensor lhs = BlockDct(t.Leaf(Tensor::FromValues(
                            {4, 8, 8},
                            [&] {
                              std::vector<double> v(x.size());
                              for (int64_t i = 0; i < x.size(); ++i) v[i] = a * x[i] + b * y[i];
                              return v;
                            }())))
                   .value();
  Tensor fx = BlockDct(xv).value();
  Tensor fy = BlockDct(yv).value();
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK(std::fabs(lhs[i] - (a * fx[i] + b * fy[i])) < 1e-9);
  }

  CHECK(std::fabs(Norm2(fx) - Norm2(x)) < 1e-9);
}

TEST_CASE("quantize: rounding and unit-kernel error bound") {
  Tape t;
  Tensor f({1, 8, 8}, 0.0);
  f[0] = 100.4;
  Tensor q({8, 8}, 1.0);
  q[0] = 0.1;
  Val out = RoundSte(QuantScale(t.Leaf(f), t.Leaf(q)));
  CHECK(out.value()[0] == doctest::Approx(10.0));

  // q all ones: reconstruction error after dequantize is at most 0.5.
  Rng rng(37);
  Tensor fr = RandomTensor({2, 8, 8}, rng, 500.0);
  Tensor ones({8, 8}, 1.0);
  Val qv = t.Leaf(ones);
  Val fq = RoundSte(QuantScale(t.Leaf(fr), qv));
  Val rec = DequantScale(fq, qv);
  for (int64_t i = 0; i < fr.size(); ++i) {
    CHECK(std::fabs(rec.value()[i] - fr[i]) <= 0.5);
  }
}

TEST_CASE("dequantize: examples and discard") {
  Tape t;
  Tensor fq({1, 8, 8}, 0.0);
  fq[0] = 10.0;
  fq[1] = 7.0;
  Tensor q({8, 8}, 0.25);
  q[0] = 0.1;
  q[1] = 0.0;  // discarded
  Tensor out = DequantScale(t.Leaf(fq), t.Leaf(q)).value();
  CHECK(out[0] == doctest::Approx(100.0));
  CHECK(out[1] == 0.0);

  // Quantizer step bound: |dequantize(quantize(F,q),q) - F| <= 0.5/q.
  Rng rng(38);
  Tensor f = RandomTensor({2, 8, 8}, rng, 300.0);
  Tensor qq({8, 8});
  for (int i = 0; i < 64; ++i) qq[i] = 0.05 + 0.95 * rng.NextDouble();
  Val qv = t.Leaf(qq);
  Tensor rec = DequantScale(RoundSte(QuantScale(t.Leaf(f), qv)), qv).value();
  for (int64_t i = 0; i < f.size(); ++i) {
    CHECK(std::fabs(rec[i] - f[i]) <= 0.5 / qq[i % 64] + 1e-12);
  }
}

TEST_CASE("quantizer monotonicity under kernel shrink") {
  Rng rng(39);
  Tape t;
  Tensor f = RandomTensor({4, 8, 8}, rng, 800.0);
  Tensor q({8, 8});
  for (int i = 0; i < 64; ++i) q[i] = rng.NextDouble();
  for (double alpha : {0.75, 0.5, 0.25}) {
    Tensor qa({8, 8});
    for (int i = 0; i < 64; ++i) qa[i] = alpha * q[i];
    Tensor full = RoundSte(QuantScale(t.Leaf(f), t.Leaf(q))).value();
    Tensor shrunk = RoundSte(QuantScale(t.Leaf(f), t.Leaf(qa))).value();
    for (int64_t i = 0; i < f.size(); ++i) {
      CHECK(std::fabs(shrunk[i]) <= std::fabs(full[i]));
    }
  }
}

TEST_CASE("codec round trip: constant image within one gray level") {
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::Ones();
  ImageRGB img(16, 16);
  for (int c = 0; c < 3; ++c) img.plane(c) = Plane(16, 16, 77.0);
  CodecRun run = RunCodec(img, ct, kernels);
  for (int c = 0; c < 3; ++c) {
    for (double v : run.reconstructed.plane(c).v) {
      CHECK(std::fabs(v - 77.0) <= 1.0);
    }
  }
}

TEST_CASE("codec round trip: all-zero kernels give mid-gray") {
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::Ones();
  for (int i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 64; ++j) kernels.table(i).value[j] = 0.0;
  }
  Rng rng(40);
  ImageRGB img(32, 32);
  for (int c = 0; c < 3; ++c) {
    for (double& v : img.plane(c).v) v = 255.0 * rng.NextDouble();
  }
  CodecRun run = RunCodec(img, ct, kernels);
  for (int c = 0; c < 3; ++c) {
    for (double v : run.reconstructed.plane(c).v) {
      CHECK(std::fabs(v - 128.0) < 1e-6);
    }
  }
}

TEST_CASE("kernel projection clamps to [0,1]") {
  CompressionKernels k = CompressionKernels::Ones();
  k.y.value[0] = -0.5;
  k.y.value[1] = 1.5;
  k.ClampTo01();
  CHECK(k.y.value[0] == 0.0);
  CHECK(k.y.value[1] == 1.0);
  CHECK(k.MinEntry() >= 0.0);
  CHECK(k.MaxEntry() <= 1.0);
}

TEST_CASE("quality scaling endpoints") {
  const QTable& base = StandardLumaQTable();
  QTable q50 = ScaleQTable(base, 50.0);
  for (int i = 0; i < 64; ++i) CHECK(q50[size_t(i)] == base[size_t(i)]);
  QTable q100 = ScaleQTable(base, 100.0);
  for (int i = 0; i < 64; ++i) CHECK(q100[size_t(i)] == 1);
  QTable q25 = ScaleQTable(base, 25.0);
  CHECK(q25[0] == std::min(255, static_cast<int>(std::round(base[0] * 2.0))));
}

TEST_CASE("full encode-decode gradient w.r.t. kernels matches frozen-offset finite differences") {
  Rng rng(41);
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(50.0);

  ImageRGB img(16, 16);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        img.plane(c).at(y, x) =
            128.0 + 60.0 * std::sin(0.3 * y + 0.1 * c) + 40.0 * std::cos(0.45 * x) +
            8.0 * (rng.NextDouble() - 0.5);
      }
    }
  }
  std::vector<const ImageRGB*> one{&img};
  Tensor r, g, b;
  ImagesToPlaneTensors(one, r, g, b);
  Tensor wy = RandomTensor({1, 16, 16}, rng);
  Tensor wcb = RandomTensor({1, 16, 16}, rng);
  Tensor wcr = RandomTensor({1, 16, 16}, rng);

  auto build = [&](RoundMode mode, const std::array<Tensor, 3>* offsets,
                   std::array<Tensor, 3>* offsets_out, Tape& tape, bool train) {
    PipelineContext ctx = BindPipeline(tape, ct, kernels, false, train);
    Val rv = tape.Leaf(r), gv = tape.Leaf(g), bv = tape.Leaf(b);
    PipelineOptions opts;
    opts.round_mode = mode;
    opts.frozen_offsets = offsets;
    EncodeResult enc = EncodePipeline(tape, rv, gv, bv, ctx, opts);
    if (offsets_out != nullptr) *offsets_out = enc.round_offsets;
    DecodeResult dec = DecodePipeline(tape, enc, ctx);
    Val loss = ops::Add(ops::Add(testutil::WeightedSum(dec.y, wy), testutil::WeightedSum(dec.cb, wcb)),
                        testutil::WeightedSum(dec.cr, wcr));
    return std::pair<PipelineContext, Val>(ctx, loss);
  };

  // Analytic gradients through the STE path.
  Tape tape;
  std::array<Tensor, 3> offsets;
  auto [ctx, loss] = build(RoundMode::kRound, nullptr, &offsets, tape, true);
  tape.Backward(loss.id);
  const std::array<Tensor, 3> analytic{tape.GradOrZero(ctx.qy.id), tape.GradOrZero(ctx.qcb.id),
                                       tape.GradOrZero(ctx.qcr.id)};

  // Finite differences on the smooth surrogate with the rounding residuals
  // held fixed.
  const double h = 1e-6;
  double max_rel = 0.0;
  for (int tbl = 0; tbl < 3; ++tbl) {
    Param& p = kernels.table(tbl);
    for (int j = 0; j < 64; ++j) {
      const double orig = p.value[j];
      auto eval = [&](double v) {
        p.value[j] = v;
        Tape t2;
        auto [c2, l2] = build(RoundMode::kFrozenOffset, &offsets, nullptr, t2, false);
        (void)c2;
        p.value[j] = orig;
        return l2.value().ScalarValue();
      };
      const double fd = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
      const double an = analytic[static_cast<size_t>(tbl)][j];
      const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1.0});
      max_rel = std::max(max_rel, rel);
    }
  }
  CHECK(max_rel < 1e-3);
}
