// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_TESTS_TESTUTIL_H_
#define QTUNE_TESTS_TESTUTIL_H_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qtune/ops.h"
#include "qtune/rng.h"
#include "qtune/tape.h"
#include "qtune/tensor.h"

namespace qtune {
namespace testutil {

inline Tensor RandomTensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = scale * (2.0 * rng.NextDouble() - 1.0);
  return t;
}

// Random values bounded away from zero, for ops with kinks at the origin.
inline Tensor RandomTensorAwayFromZero(std::vector<int> shape, Rng& rng, double margin = 0.15) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) {
    double u = 2.0 * rng.NextDouble() - 1.0;
    t[i] = (u >= 0 ? 1.0 : -1.0) * (margin + std::fabs(u));
  }
  return t;
}

// Reduces an arbitrary-shaped output to a scalar with fixed random weights so
// every output element participates in the gradient.
inline Val WeightedSum(Val out, const Tensor& w) {
  Val wv = out.tape->Leaf(w, false);
  return ops::ReduceSum(ops::Mul(out, wv));
}

struct FdResult {
  double max_rel_err = 0.0;
  std::string where;
};

// Central finite differences against the tape's analytic gradients.
// `build` must construct a scalar loss from freshly created leaves.
inline FdResult CheckGradients(
    const std::function<Val(Tape&, std::vector<Val>&)>& build,
    const std::vector<Tensor>& inputs, double h = 1e-4) {
  // Analytic pass.
  Tape tape;
  std::vector<Val> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.Leaf(t, true));
  Val loss = build(tape, leaves);
  tape.Backward(loss.id);
  std::vector<Tensor> analytic;
  for (const Val& v : leaves) analytic.push_back(tape.GradOrZero(v.id));

  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape t2;
    std::vector<Val> ls;
    ls.reserve(xs.size());
    for (const Tensor& x : xs) ls.push_back(t2.Leaf(x, false));
    return build(t2, ls).value().ScalarValue();
  };

  FdResult res;
  std::vector<Tensor> work = inputs;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (int64_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = work[i][j];
      work[i][j] = orig + h;
      const double lp = eval(work);
      work[i][j] = orig - h;
      const double lm = eval(work);
      work[i][j] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = analytic[i][j];
      const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-2});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.where = "input " + std::to_string(i) + " elem " + std::to_string(j) +
                    " fd=" + std::to_string(fd) + " an=" + std::to_string(an);
      }
    }
  }
  return res;
}

inline double DotAll(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace testutil
}  // namespace qtune

#endif  // QTUNE_TESTS_TESTUTIL_H_
