// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_OPTIM_H_
#define QTUNE_OPTIM_H_

#include <cstdint>
#include <vector>

#include "qtune/tape.h"
#include "qtune/tensor.h"

namespace qtune {

// Per-parameter Adam accumulators. The step counter advances once per
// AdamStep call, including calls whose update was skipped.
struct AdamState {
  Tensor m;
  Tensor v;
  uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const std::vector<int>& shape, double b1 = 0.9, double b2 = 0.999,
                     double e = 1e-8)
      : m(shape), v(shape), beta1(b1), beta2(b2), eps(e) {}
  AdamState() = default;
};

// Standard Adam update with bias correction, applied in place to p.value
// from p.grad. A non-finite gradient skips the whole update for this
// parameter (moments untouched) but still advances the counter; returns
// false in that case.
bool AdamStep(Param& p, AdamState& s, double lr);

// Scales the gradients of `params` so their joint L2 norm is at most
// `max_norm`. Returns the pre-clip norm.
double ClipGradNorm(const std::vector<Param*>& params, double max_norm);

}  // namespace qtune

#endif  // QTUNE_OPTIM_H_
