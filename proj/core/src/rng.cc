// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/rng.h"

#include <cmath>
#include <sstream>

namespace qtune {

uint64_t Rng::NextBelow(uint64_t n) {
  if (n == 0) return 0;
  // Rejection sampling to avoid modulo bias.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = eng_();
  } while (x >= limit);
  return x % n;
}

double Rng::NextGaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * NextDouble() - 1.0;
    v = 2.0 * NextDouble() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  have_spare_ = true;
  return u * f;
}

void Rng::FillGaussian(double* out, int64_t n, double stddev) {
  for (int64_t i = 0; i < n; ++i) out[i] = stddev * NextGaussian();
}

std::string Rng::SerializeState() const {
  std::ostringstream os;
  os << eng_ << " " << (have_spare_ ? 1 : 0) << " ";
  os.precision(17);
  os << spare_;
  return os.str();
}

void Rng::RestoreState(const std::string& s) {
  std::istringstream is(s);
  is >> eng_;
  int hs = 0;
  is >> hs >> spare_;
  have_spare_ = hs != 0;
}

}  // namespace qtune
