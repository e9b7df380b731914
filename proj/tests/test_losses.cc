// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <cmath>

#include "doctest.h"
#include "qtune/jpeg_pipeline.h"
#include "qtune/losses.h"
#include "testutil.h"

using namespace qtune;
using namespace qtune::ops;
using testutil::RandomTensor;

namespace {

std::array<Val, 3> BindKernels(Tape& tape, CompressionKernels& k, bool grad) {
  return {tape.Bind(k.y, grad), tape.Bind(k.cb, grad), tape.Bind(k.cr, grad)};
}

}  // namespace

TEST_CASE("cross entropy anchors") {
  Tape t;
  // Perfectly confident correct logits: loss tends to 0.
  Val confident = t.Leaf(Tensor::FromValues({1, 3}, {50.0, 0.0, 0.0}));
  CHECK(CrossEntropy(confident, {0}).value().ScalarValue() < 1e-9);

  // Uniform logits over C classes: ln C.
  Val uniform = t.Leaf(Tensor({4, 7}, 0.0));
  CHECK(CrossEntropy(uniform, {0, 1, 2, 3}).value().ScalarValue() ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Rng rng(80);
  Tensor logits = RandomTensor({3, 5}, rng, 2.0);
  auto r = testutil::CheckGradients(
      [&](Tape&, std::vector<Val>& in) { return CrossEntropy(in[0], {1, 4, 0}); }, {logits});
  INFO(r.where);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("hinge-l1 penalty: paper operating point lambda=0.001, lambda1=1, c=10") {
  LossConfig cfg;
  cfg.lambda = 0.001;
  cfg.lambda1 = 1.0;
  cfg.c = 10.0;

  CompressionKernels ones = CompressionKernels::Ones();
  Tape t;
  auto kv = BindKernels(t, ones, false);
  // q=1 everywhere: hinge terms all zero (1 < c), l1 contributes 192.
  CHECK(QuanPenaltyHingeL1(kv, cfg).value().ScalarValue() == doctest::Approx(192.0));

  CompressionKernels zeros = CompressionKernels::Ones();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) zeros.table(i).value[j] = 0.0;
  }
  Tape t2;
  auto kz = BindKernels(t2, zeros, false);
  CHECK(QuanPenaltyHingeL1(kz, cfg).value().ScalarValue() == doctest::Approx(0.0));
}

TEST_CASE("hinge-l1 penalty: active hinge term") {
  LossConfig cfg;
  cfg.lambda1 = 0.0;
  cfg.c = 1.0;
  CompressionKernels k = CompressionKernels::Ones();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) k.table(i).value[j] = 0.0;
  }
  k.y.value[0] = 2.0;  // max(4-1, 0) = 3
  Tape t;
  auto kv = BindKernels(t, k, false);
  CHECK(QuanPenaltyHingeL1(kv, cfg).value().ScalarValue() == doctest::Approx(3.0));
}

TEST_CASE("pure l2 penalty and its gradient") {
  CompressionKernels ones = CompressionKernels::Ones();
  Tape t;
  auto kv = BindKernels(t, ones, true);
  Val p = QuanPenaltyL2(kv);
  CHECK(p.value().ScalarValue() == doctest::Approx(192.0));
  t.Backward(p.id);
  for (int i = 0; i < 3; ++i) {
    const Tensor g = t.GradOrZero(kv[static_cast<size_t>(i)].id);
    for (int j = 0; j < 64; ++j) CHECK(g[j] == doctest::Approx(2.0));  // d(q^2)/dq = 2q
  }

  CompressionKernels zeros = CompressionKernels::Ones();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) zeros.table(i).value[j] = 0.0;
  }
  Tape t2;
  auto kz = BindKernels(t2, zeros, false);
  CHECK(QuanPenaltyL2(kz).value().ScalarValue() == doctest::Approx(0.0));
}

TEST_CASE("subgradients at the kinks are zero") {
  LossConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.c = 1.0;
  CompressionKernels k = CompressionKernels::Ones();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) k.table(i).value[j] = 0.0;
  }
  k.y.value[0] = 0.0;  // |q| kink
  k.y.value[1] = 1.0;  // q^2 == c hinge kink
  Tape t;
  auto kv = BindKernels(t, k, true);
  Val p = QuanPenaltyHingeL1(kv, cfg);
  t.Backward(p.id);
  const Tensor g = t.GradOrZero(kv[0].id);
  CHECK(g[0] == 0.0);                      // dead kernels stay dead
  CHECK(g[1] == doctest::Approx(1.0));     // only the l1 slope, no hinge slope
}

TEST_CASE("total loss composition and monotonicity in lambda") {
  LossConfig cfg;
  cfg.lambda = 0.0;
  Tape t;
  Val cla = t.Leaf(Tensor::Scalar(1.0));
  Val quan = t.Leaf(Tensor::Scalar(192.0));
  CHECK(TotalLoss(cla, quan, cfg).value().ScalarValue() == doctest::Approx(1.0));

  cfg.lambda = 0.001;
  CHECK(TotalLoss(cla, quan, cfg).value().ScalarValue() == doctest::Approx(1.192));

  double prev = -1.0;
  for (double lam : {0.0, 0.01, 0.1, 1.0}) {
    cfg.lambda = lam;
    const double v = TotalLoss(cla, quan, cfg).value().ScalarValue();
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("penalties are permutation invariant over the 192 entries") {
  Rng rng(81);
  CompressionKernels a = CompressionKernels::Ones();
  std::vector<double> entries(192);
  for (double& v : entries) v = rng.NextDouble();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) a.table(i).value[j] = entries[static_cast<size_t>(i * 64 + j)];
  }
  CompressionKernels b = CompressionKernels::Ones();
  std::vector<double> shuffled = entries;
  rng.Shuffle(shuffled);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) b.table(i).value[j] = shuffled[static_cast<size_t>(i * 64 + j)];
  }
  LossConfig cfg;
  cfg.lambda1 = 0.7;
  cfg.c = 0.3;
  Tape t;
  auto av = BindKernels(t, a, false);
  auto bv = BindKernels(t, b, false);
  CHECK(QuanPenaltyHingeL1(av, cfg).value().ScalarValue() ==
        doctest::Approx(QuanPenaltyHingeL1(bv, cfg).value().ScalarValue()).epsilon(1e-12));
  CHECK(QuanPenaltyL2(av).value().ScalarValue() ==
        doctest::Approx(QuanPenaltyL2(bv).value().ScalarValue()).epsilon(1e-12));
}

TEST_CASE("total-loss kernel gradient decomposes into the two paths") {
  // With the classification path zeroed (lambda only), the kernel gradient is
  // lambda times the penalty gradient; with lambda zero it is the
  // classification path alone.
  CompressionKernels k = CompressionKernels::StandardQuality(50.0);
  LossConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.c = 0.25;

  auto penalty_grad = [&](double lambda) {
    cfg.lambda = lambda;
    Tape t;
    auto kv = BindKernels(t, k, true);
    Val quan = QuanPenalty(kv, cfg);
    Val cla = t.Leaf(Tensor::Scalar(0.0));  // no classification dependence
    Val total = TotalLoss(cla, quan, cfg);
    t.Backward(total.id);
    return t.GradOrZero(kv[0].id);
  };

  const Tensor g1 = penalty_grad(1.0);
  const Tensor g2 = penalty_grad(0.5);
  for (int j = 0; j < 64; ++j) {
    CHECK(g2[j] == doctest::Approx(0.5 * g1[j]).epsilon(1e-12));
  }
  const Tensor g0 = penalty_grad(0.0);
  for (int j = 0; j < 64; ++j) CHECK(g0[j] == 0.0);
}
