// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_IMAGE_H_
#define QTUNE_IMAGE_H_

#include <cstdint>
#include <string>
#include <vector>

namespace qtune {

// Single H x W plane of doubles.
struct Plane {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int height, int width, double fill = 0.0)
      : h(height), w(width), v(static_cast<size_t>(height) * width, fill) {}

  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  double* row(int y) { return v.data() + static_cast<size_t>(y) * w; }
  const double* row(int y) const { return v.data() + static_cast<size_t>(y) * w; }
};

// RGB image with samples in [0,255].
struct ImageRGB {
  Plane r, g, b;

  ImageRGB() = default;
  ImageRGB(int h, int w) : r(h, w), g(h, w), b(h, w) {}
  int height() const { return r.h; }
  int width() const { return r.w; }
  const Plane& plane(int i) const { return i == 0 ? r : (i == 1 ? g : b); }
  Plane& plane(int i) { return i == 0 ? r : (i == 1 ? g : b); }
};

// YCbCr image with 4:2:0 chroma. When level_shifted, samples are in
// [-128,127]; otherwise [0,255].
struct ImageYCbCr {
  Plane y, cb, cr;
  bool level_shifted = false;
};

// Pads to multiples of `mult` by edge replication (no-op when already
// aligned).
ImageRGB PadToMultiple(const ImageRGB& img, int mult);
Plane PadPlane(const Plane& p, int target_h, int target_w);
ImageRGB CropImage(const ImageRGB& img, int h, int w);

double ClampPixel(double v);

// PPM (P6, maxval 255) and PNG (8-bit, gray/RGB/alpha accepted) codecs.
// Errors throw std::runtime_error with the path in the message.
ImageRGB ReadPpm(const std::string& path);
void WritePpm(const std::string& path, const ImageRGB& img);
ImageRGB ReadPng(const std::string& path);
void WritePng(const std::string& path, const ImageRGB& img);

// Dispatch on file extension (.ppm, .png).
ImageRGB LoadImage(const std::string& path);
void SaveImage(const std::string& path, const ImageRGB& img);

}  // namespace qtune

#endif  // QTUNE_IMAGE_H_
