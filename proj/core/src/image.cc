// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/image.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace qtune {

namespace {

[[noreturn]] void Fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t ToByte(double v) {
  return static_cast<uint8_t>(std::lround(ClampPixel(v)));
}

}  // namespace

double ClampPixel(double v) { return std::clamp(v, 0.0, 255.0); }

Plane PadPlane(const Plane& p, int target_h, int target_w) {
  Plane out(target_h, target_w);
  for (int y = 0; y < target_h; ++y) {
    const int sy = std::min(y, p.h - 1);
    for (int x = 0; x < target_w; ++x) {
      out.at(y, x) = p.at(sy, std::min(x, p.w - 1));
    }
  }
  return out;
}

ImageRGB PadToMultiple(const ImageRGB& img, int mult) {
  const int th = (img.height() + mult - 1) / mult * mult;
  const int tw = (img.width() + mult - 1) / mult * mult;
  if (th == img.height() && tw == img.width()) return img;
  ImageRGB out;
  out.r = PadPlane(img.r, th, tw);
  out.g = PadPlane(img.g, th, tw);
  out.b = PadPlane(img.b, th, tw);
  return out;
}

ImageRGB CropImage(const ImageRGB& img, int h, int w) {
  ImageRGB out(h, w);
  for (int i = 0; i < 3; ++i) {
    const Plane& src = img.plane(i);
    Plane& dst = out.plane(i);
    for (int y = 0; y < h; ++y) {
      std::copy(src.row(y), src.row(y) + w, dst.row(y));
    }
  }
  return out;
}

ImageRGB ReadPpm(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) Fail(path, "cannot open");
  char magic[3] = {0};
  if (std::fscanf(f.get(), "%2s", magic) != 1 || magic[0] != 'P' || magic[1] != '6') {
    Fail(path, "not a P6 PPM");
  }
  auto next_int = [&]() {
    int c;
    // Skip whitespace and '#' comments.
    for (;;) {
      c = std::fgetc(f.get());
      if (c == '#') {
        while (c != '\n' && c != EOF) c = std::fgetc(f.get());
      } else if (!std::isspace(c)) {
        break;
      }
    }
    int val = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
      val = val * 10 + (c - '0');
      any = true;
      c = std::fgetc(f.get());
    }
    if (!any) Fail(path, "malformed header");
    return val;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255) Fail(path, "unsupported PPM dimensions/maxval");
  std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
  ImageRGB img(h, w);
  for (int y = 0; y < h; ++y) {
    if (std::fread(row.data(), 1, row.size(), f.get()) != row.size()) {
      Fail(path, "truncated pixel data at row " + std::to_string(y));
    }
    for (int x = 0; x < w; ++x) {
      img.r.at(y, x) = row[static_cast<size_t>(x) * 3 + 0];
      img.g.at(y, x) = row[static_cast<size_t>(x) * 3 + 1];
      img.b.at(y, x) = row[static_cast<size_t>(x) * 3 + 2];
    }
  }
  return img;
}

void WritePpm(const std::string& path, const ImageRGB& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) Fail(path, "cannot open for writing");
  std::fprintf(f.get(), "P6\n%d %d\n255\n", img.width(), img.height());
  std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      row[static_cast<size_t>(x) * 3 + 0] = ToByte(img.r.at(y, x));
      row[static_cast<size_t>(x) * 3 + 1] = ToByte(img.g.at(y, x));
      row[static_cast<size_t>(x) * 3 + 2] = ToByte(img.b.at(y, x));
    }
    if (std::fwrite(row.data(), 1, row.size(), f.get()) != row.size()) {
      Fail(path, "short write");
    }
  }
}

ImageRGB ReadPng(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) Fail(path, "cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) Fail(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    Fail(path, "png_create_info_struct failed");
  }
  std::vector<png_bytep> rows;
  std::vector<uint8_t> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    Fail(path, "libpng error while reading");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  pixels.resize(static_cast<size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    rows[y] = pixels.data() + static_cast<size_t>(y) * w * 3;
  }
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  ImageRGB img(static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 y = 0; y < h; ++y) {
    const uint8_t* row = pixels.data() + static_cast<size_t>(y) * w * 3;
    for (png_uint_32 x = 0; x < w; ++x) {
      img.r.at(static_cast<int>(y), static_cast<int>(x)) = row[x * 3 + 0];
      img.g.at(static_cast<int>(y), static_cast<int>(x)) = row[x * 3 + 1];
      img.b.at(static_cast<int>(y), static_cast<int>(x)) = row[x * 3 + 2];
    }
  }
  return img;
}

void WritePng(const std::string& path, const ImageRGB& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) Fail(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) Fail(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    Fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    Fail(path, "libpng error while writing");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      row[static_cast<size_t>(x) * 3 + 0] = ToByte(img.r.at(y, x));
      row[static_cast<size_t>(x) * 3 + 1] = ToByte(img.g.at(y, x));
      row[static_cast<size_t>(x) * 3 + 2] = ToByte(img.b.at(y, x));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

ImageRGB LoadImage(const std::string& path) {
  if (EndsWith(path, ".ppm")) return ReadPpm(path);
  if (EndsWith(path, ".png")) return ReadPng(path);
  Fail(path, "unsupported image extension (expected .ppm or .png)");
}

void SaveImage(const std::string& path, const ImageRGB& img) {
  if (EndsWith(path, ".ppm")) return WritePpm(path, img);
  if (EndsWith(path, ".png")) return WritePng(path, img);
  Fail(path, "unsupported image extension (expected .ppm or .png)");
}

}  // namespace qtune
