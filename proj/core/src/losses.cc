// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/losses.h"

#include <cmath>
#include <stdexcept>

namespace qtune {

using namespace ops;

void LossConfig::Validate() const {
  for (double v : {lambda, lambda1, c}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("LossConfig: hyper-parameters must be finite and >= 0");
    }
  }
}

Val CrossEntropy(Val logits, const std::vector<int>& labels) {
  return SoftmaxCrossEntropy(logits, labels);
}

Val QuanPenaltyHingeL1(const std::array<Val, 3>& kernels, const LossConfig& cfg) {
  Val total;
  for (int i = 0; i < 3; ++i) {
    Val q = kernels[static_cast<size_t>(i)];
    Val hinge = MaxConst(AddScalar(Square(q), -cfg.c), 0.0);
    Val term = ReduceSum(Add(hinge, MulScalar(Abs(q), cfg.lambda1)));
    total = i == 0 ? term : Add(total, term);
  }
  return total;
}

Val QuanPenaltyL2(const std::array<Val, 3>& kernels) {
  Val total;
  for (int i = 0; i < 3; ++i) {
    Val term = ReduceSum(Square(kernels[static_cast<size_t>(i)]));
    total = i == 0 ? term : Add(total, term);
  }
  return total;
}

Val QuanPenalty(const std::array<Val, 3>& kernels, const LossConfig& cfg) {
  return cfg.penalty == PenaltyKind::kHingeL1 ? QuanPenaltyHingeL1(kernels, cfg)
                                              : QuanPenaltyL2(kernels);
}

Val TotalLoss(Val cla, Val quan, const LossConfig& cfg) {
  return Add(cla, MulScalar(quan, cfg.lambda));
}

}  // namespace qtune
