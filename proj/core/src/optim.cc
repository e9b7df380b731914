// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/optim.h"

#include <cmath>
#include <stdexcept>

namespace qtune {

bool AdamStep(Param& p, AdamState& s, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("AdamStep: lr must be > 0");
  if (!s.m.SameShape(p.value)) throw std::invalid_argument("AdamStep: state shape mismatch");
  s.step += 1;
  const int64_t n = p.value.size();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(p.grad[i])) return false;
  }
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (int64_t i = 0; i < n; ++i) {
    const double g = p.grad[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    p.value[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
  }
  return true;
}

double ClipGradNorm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (const Param* p : params) {
    for (int64_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Param* p : params) {
      for (int64_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
    }
  }
  return norm;
}

}  // namespace qtune
