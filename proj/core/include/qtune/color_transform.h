// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_COLOR_TRANSFORM_H_
#define QTUNE_COLOR_TRANSFORM_H_

#include <array>

#include "qtune/image.h"
#include "qtune/tape.h"

namespace qtune {

// Invertible 3x3 color transform with offset: ycbcr = M * rgb + off.
// Initialized to the JPEG/BT.601 coefficients; may be trained.
struct ColorTransform {
  Param matrix;  // [3,3]
  Param offset;  // [3]
  bool trainable = false;

  static ColorTransform Bt601();

  // rgb = M^-1 * (ycbcr - off), computed from the current coefficients.
  void InverseCoeffs(std::array<double, 9>& inv, std::array<double, 3>& off) const;

  // Plain (non-recorded) conversions; both planes full resolution.
  // Forward output is level-shifted by -128 on all three planes.
  void RgbToYCbCr(const ImageRGB& rgb, Plane& y, Plane& cb, Plane& cr) const;
  // Inverse of the above: planes are level-shifted YCbCr; output clamped.
  ImageRGB YCbCrToRgb(const Plane& y, const Plane& cb, const Plane& cr) const;
};

}  // namespace qtune

#endif  // QTUNE_COLOR_TRANSFORM_H_
