// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/metrics.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace qtune {

namespace {

void CheckDims(const char* op, const ImageRGB& a, const ImageRGB& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch");
  }
}

Plane LumaOf(const ImageRGB& img) {
  Plane y(img.height(), img.width());
  for (size_t i = 0; i < y.v.size(); ++i) {
    y.v[i] = 0.299 * img.r.v[i] + 0.587 * img.g.v[i] + 0.114 * img.b.v[i];
  }
  return y;
}

std::vector<double> GaussianKernel11() {
  std::vector<double> k(11);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable 11x11 Gaussian filter, valid region only (border of 5 dropped).
Plane GaussianValid(const Plane& p) {
  static const std::vector<double> k = GaussianKernel11();
  const int vh = p.h - 10, vw = p.w - 10;
  if (vh <= 0 || vw <= 0) throw std::invalid_argument("Ssim: image smaller than the 11x11 window");
  Plane horiz(p.h, vw);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int t = 0; t < 11; ++t) s += k[static_cast<size_t>(t)] * p.at(y, x + t);
      horiz.at(y, x) = s;
    }
  }
  Plane out(vh, vw);
  for (int y = 0; y < vh; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int t = 0; t < 11; ++t) s += k[static_cast<size_t>(t)] * horiz.at(y + t, x);
      out.at(y, x) = s;
    }
  }
  return out;
}

Plane MulPlanes(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

}  // namespace

double Psnr(const ImageRGB& ref, const ImageRGB& test) {
  CheckDims("Psnr", ref, test);
  double se = 0.0;
  int64_t n = 0;
  for (int c = 0; c < 3; ++c) {
    const Plane& a = ref.plane(c);
    const Plane& b = test.plane(c);
    for (size_t i = 0; i < a.v.size(); ++i) {
      const double d = a.v[i] - b.v[i];
      se += d * d;
    }
    n += static_cast<int64_t>(a.v.size());
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(n);
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double Ssim(const ImageRGB& ref, const ImageRGB& test) {
  CheckDims("Ssim", ref, test);
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

  const Plane x = LumaOf(ref);
  const Plane y = LumaOf(test);

  const Plane mu_x = GaussianValid(x);
  const Plane mu_y = GaussianValid(y);
  const Plane xx = GaussianValid(MulPlanes(x, x));
  const Plane yy = GaussianValid(MulPlanes(y, y));
  const Plane xy = GaussianValid(MulPlanes(x, y));

  double total = 0.0;
  for (size_t i = 0; i < mu_x.v.size(); ++i) {
    const double mx = mu_x.v[i], my = mu_y.v[i];
    const double var_x = xx.v[i] - mx * mx;
    const double var_y = yy.v[i] - my * my;
    const double cov = xy.v[i] - mx * my;
    const double s = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (var_x + var_y + c2));
    total += s;
  }
  return total / static_cast<double>(mu_x.v.size());
}

}  // namespace qtune
