// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_LOSSES_H_
#define QTUNE_LOSSES_H_

#include <array>
#include <vector>

#include "qtune/ops.h"
#include "qtune/tape.h"

namespace qtune {

enum class PenaltyKind { kHingeL1, kPureL2 };

struct LossConfig {
  double lambda = 0.0;
  double lambda1 = 1.0;
  double c = 10.0;
  PenaltyKind penalty = PenaltyKind::kHingeL1;

  void Validate() const;
};

// Mean over the batch of -log softmax(logits)[label].
Val CrossEntropy(Val logits, const std::vector<int>& labels);

// sum_i sum_jk [ max(q_i(j,k)^2 - c, 0) + lambda1 * |q_i(j,k)| ]
// Subgradients at |q| == 0 and q^2 == c are 0.
Val QuanPenaltyHingeL1(const std::array<Val, 3>& kernels, const LossConfig& cfg);

// sum_i sum_jk q_i(j,k)^2
Val QuanPenaltyL2(const std::array<Val, 3>& kernels);

Val QuanPenalty(const std::array<Val, 3>& kernels, const LossConfig& cfg);

// cla + lambda * quan
Val TotalLoss(Val cla, Val quan, const LossConfig& cfg);

}  // namespace qtune

#endif  // QTUNE_LOSSES_H_
