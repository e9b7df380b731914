// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/color_transform.h"

#include <cmath>
#include <stdexcept>

namespace qtune {

ColorTransform ColorTransform::Bt601() {
  ColorTransform ct;
  ct.matrix = Param("color.matrix",
                    Tensor::FromValues({3, 3}, {0.299, 0.587, 0.114,            //
                                                -0.168736, -0.331264, 0.5,      //
                                                0.5, -0.418688, -0.081312}));
  ct.offset = Param("color.offset", Tensor::FromValues({3}, {0.0, 128.0, 128.0}));
  return ct;
}

void ColorTransform::InverseCoeffs(std::array<double, 9>& inv, std::array<double, 3>& off) const {
  const Tensor& m = matrix.value;
  const double a = m[0], b = m[1], c = m[2];
  const double d = m[3], e = m[4], f = m[5];
  const double g = m[6], h = m[7], i = m[8];
  const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  if (std::fabs(det) < 1e-12) {
    throw std::runtime_error("ColorTransform: matrix is singular, cannot invert");
  }
  inv[0] = (e * i - f * h) / det;
  inv[1] = (c * h - b * i) / det;
  inv[2] = (b * f - c * e) / det;
  inv[3] = (f * g - d * i) / det;
  inv[4] = (a * i - c * g) / det;
  inv[5] = (c * d - a * f) / det;
  inv[6] = (d * h - e * g) / det;
  inv[7] = (b * g - a * h) / det;
  inv[8] = (a * e - b * d) / det;
  off[0] = offset.value[0];
  off[1] = offset.value[1];
  off[2] = offset.value[2];
}

void ColorTransform::RgbToYCbCr(const ImageRGB& rgb, Plane& y, Plane& cb, Plane& cr) const {
  const int h = rgb.height(), w = rgb.width();
  y = Plane(h, w);
  cb = Plane(h, w);
  cr = Plane(h, w);
  const Tensor& m = matrix.value;
  const Tensor& o = offset.value;
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const double r = rgb.r.at(yy, xx), g = rgb.g.at(yy, xx), b = rgb.b.at(yy, xx);
      y.at(yy, xx) = m[0] * r + m[1] * g + m[2] * b + o[0] - 128.0;
      cb.at(yy, xx) = m[3] * r + m[4] * g + m[5] * b + o[1] - 128.0;
      cr.at(yy, xx) = m[6] * r + m[7] * g + m[8] * b + o[2] - 128.0;
    }
  }
}

ImageRGB ColorTransform::YCbCrToRgb(const Plane& y, const Plane& cb, const Plane& cr) const {
  std::array<double, 9> inv;
  std::array<double, 3> off;
  InverseCoeffs(inv, off);
  ImageRGB out(y.h, y.w);
  for (int yy = 0; yy < y.h; ++yy) {
    for (int xx = 0; xx < y.w; ++xx) {
      const double vy = y.at(yy, xx) + 128.0 - off[0];
      const double vcb = cb.at(yy, xx) + 128.0 - off[1];
      const double vcr = cr.at(yy, xx) + 128.0 - off[2];
      out.r.at(yy, xx) = ClampPixel(inv[0] * vy + inv[1] * vcb + inv[2] * vcr);
      out.g.at(yy, xx) = ClampPixel(inv[3] * vy + inv[4] * vcb + inv[5] * vcr);
      out.b.at(yy, xx) = ClampPixel(inv[6] * vy + inv[7] * vcb + inv[8] * vcr);
    }
  }
  return out;
}

}  // namespace qtune
