// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "benchmark/benchmark.h"
#include "qtune/ops.h"
#include "qtune/rng.h"

namespace {

using namespace qtune;
using namespace qtune::ops;

Tensor RandomTensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = 2.0 * rng.NextDouble() - 1.0;
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor x = RandomTensor({n, 16, 32, 32}, rng);
  Tensor w = RandomTensor({16, 16, 3, 3}, rng);
  for (auto _ : state) {
    Tape t;
    Val out = Conv2d(t.Leaf(x), t.Leaf(w), 1, 1);
    benchmark::DoNotOptimize(out.value().data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(32);

void BM_Conv2dTrainStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  Tensor x = RandomTensor({n, 16, 32, 32}, rng);
  Param w("w", RandomTensor({16, 16, 3, 3}, rng));
  for (auto _ : state) {
    w.ZeroGrad();
    Tape t;
    Val wv = t.Bind(w);
    Val loss = ReduceSum(Square(Conv2d(t.Leaf(x), wv, 1, 1)));
    t.Backward(loss.id);
    t.HarvestParamGrads();
    benchmark::DoNotOptimize(w.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Conv2dTrainStep)->Arg(8)->Arg(32);

void BM_BlockDct(benchmark::State& state) {
  Rng rng(3);
  Tensor blocks = RandomTensor({1024, 8, 8}, rng);
  for (auto _ : state) {
    Tape t;
    Val out = BlockDct(t.Leaf(blocks));
    benchmark::DoNotOptimize(out.value().data());
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_BlockDct);

void BM_Dense(benchmark::State& state) {
  Rng rng(4);
  Tensor x = RandomTensor({100, 256}, rng);
  Tensor w = RandomTensor({128, 256}, rng);
  Tensor b = RandomTensor({128}, rng);
  for (auto _ : state) {
    Tape t;
    Val out = Dense(t.Leaf(x), t.Leaf(w), t.Leaf(b));
    benchmark::DoNotOptimize(out.value().data());
  }
}
BENCHMARK(BM_Dense);

}  // namespace
