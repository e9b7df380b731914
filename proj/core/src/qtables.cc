// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/qtables.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qtune {

const QTable& StandardLumaQTable() {
  static const QTable t = {16, 11, 10, 16, 24,  40,  51,  61,   //
                           12, 12, 14, 19, 26,  58,  60,  55,   //
                           14, 13, 16, 24, 40,  57,  69,  56,   //
                           14, 17, 22, 29, 51,  87,  80,  62,   //
                           18, 22, 37, 56, 68,  109, 103, 77,   //
                           24, 35, 55, 64, 81,  104, 113, 92,   //
                           49, 64, 78, 87, 103, 121, 120, 101,  //
                           72, 92, 95, 98, 112, 100, 103, 99};
  return t;
}

const QTable& StandardChromaQTable() {
  static const QTable t = {17, 18, 24, 47, 99, 99, 99, 99,  //
                           18, 21, 26, 66, 99, 99, 99, 99,  //
                           24, 26, 56, 99, 99, 99, 99, 99,  //
                           47, 66, 99, 99, 99, 99, 99, 99,  //
                           99, 99, 99, 99, 99, 99, 99, 99,  //
                           99, 99, 99, 99, 99, 99, 99, 99,  //
                           99, 99, 99, 99, 99, 99, 99, 99,  //
                           99, 99, 99, 99, 99, 99, 99, 99};
  return t;
}

QTable ScaleQTable(const QTable& base, double quality) {
  if (quality <= 0.0 || quality > 100.0) {
    throw std::invalid_argument("ScaleQTable: quality must be in (0,100]");
  }
  const double scale = quality >= 50.0 ? 2.0 - quality / 50.0 : 50.0 / quality;
  QTable out;
  for (int i = 0; i < 64; ++i) {
    const double v = std::round(base[static_cast<size_t>(i)] * scale);
    out[static_cast<size_t>(i)] = static_cast<int>(std::clamp(v, 1.0, 255.0));
  }
  return out;
}

Tensor KernelFromQTable(const QTable& q) {
  Tensor k({8, 8});
  for (int i = 0; i < 64; ++i) k[i] = 1.0 / static_cast<double>(q[static_cast<size_t>(i)]);
  return k;
}

QTable QTableFromKernel(const Tensor& kernel) {
  if (kernel.size() != 64) throw std::invalid_argument("QTableFromKernel: kernel must be 8x8");
  QTable out;
  for (int i = 0; i < 64; ++i) {
    const double q = kernel[i];
    if (q < 1.0 / 255.0) {
      out[static_cast<size_t>(i)] = 255;
    } else {
      out[static_cast<size_t>(i)] =
          static_cast<int>(std::clamp(std::round(1.0 / q), 1.0, 255.0));
    }
  }
  return out;
}

}  // namespace qtune
