// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_QTABLES_H_
#define QTUNE_QTABLES_H_

#include <array>

#include "qtune/tensor.h"

namespace qtune {

// 8x8 integer quantization table, row-major, entries in [1,255].
using QTable = std::array<int, 64>;

const QTable& StandardLumaQTable();
const QTable& StandardChromaQTable();

// Maps a quality percentage to a scaled table with the common convention:
// quality >= 50: scale = 2 - quality/50; quality < 50: scale = 50/quality.
// Entries are rounded and clamped to [1,255].
QTable ScaleQTable(const QTable& base, double quality);

// Compression kernel q = 1/Q as an [8,8] tensor.
Tensor KernelFromQTable(const QTable& q);

// Q(j,k) = clamp(round(1/q(j,k)), 1, 255); entries with q < 1/255
// (including discarded q == 0) map to 255.
QTable QTableFromKernel(const Tensor& kernel);

}  // namespace qtune

#endif  // QTUNE_QTABLES_H_
