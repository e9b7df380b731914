// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_METRICS_H_
#define QTUNE_METRICS_H_

#include "qtune/image.h"

namespace qtune {

// 10*log10(255^2 / MSE) over all RGB samples. Identical images report
// +infinity.
double Psnr(const ImageRGB& ref, const ImageRGB& test);

// Mean local SSIM on the luma plane: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, L = 255.
double Ssim(const ImageRGB& ref, const ImageRGB& test);

}  // namespace qtune

#endif  // QTUNE_METRICS_H_
