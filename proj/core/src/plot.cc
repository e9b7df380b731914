// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "qtune/image.h"

namespace qtune {

namespace {

// 5x7 glyphs for numeric tick labels.
struct Glyph {
  char ch;
  uint8_t rows[7];
};

const Glyph kGlyphs[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
};

const Glyph* FindGlyph(char c) {
  for (const Glyph& g : kGlyphs) {
    if (g.ch == c) return &g;
  }
  return nullptr;
}

void SetPixel(ImageRGB& img, int x, int y, const std::array<uint8_t, 3>& c) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
  img.r.at(y, x) = c[0];
  img.g.at(y, x) = c[1];
  img.b.at(y, x) = c[2];
}

void DrawText(ImageRGB& img, int x, int y, const std::string& text,
              const std::array<uint8_t, 3>& c) {
  int cx = x;
  for (char ch : text) {
    const Glyph* g = FindGlyph(ch);
    if (g != nullptr) {
      for (int r = 0; r < 7; ++r) {
        for (int col = 0; col < 5; ++col) {
          if (g->rows[r] & (1 << (4 - col))) SetPixel(img, cx + col, y + r, c);
        }
      }
    }
    cx += 6;
  }
}

void DrawLine(ImageRGB& img, int x0, int y0, int x1, int y1, const std::array<uint8_t, 3>& c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    SetPixel(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void DrawMarker(ImageRGB& img, int x, int y, const std::array<uint8_t, 3>& c) {
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      if (std::abs(dx) + std::abs(dy) <= 2) SetPixel(img, x + dx, y + dy, c);
    }
  }
}

std::string TickLabel(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void WriteLinePlot(const std::string& path, const std::vector<PlotSeries>& series, int width,
                   int height) {
  ImageRGB img(height, width);
  for (int c = 0; c < 3; ++c) img.plane(c) = Plane(height, width, 255.0);

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : series) {
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin) || !std::isfinite(ymin)) {
    xmin = 0; xmax = 1; ymin = 0; ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.08 * (ymax - ymin);
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

  const int left = 64, right = width - 16, top = 16, bottom = height - 40;
  const std::array<uint8_t, 3> black{0, 0, 0};
  const std::array<uint8_t, 3> grid{220, 220, 220};

  auto px = [&](double x) {
    return left + static_cast<int>((x - xmin) / (xmax - xmin) * (right - left));
  };
  auto py = [&](double y) {
    return bottom - static_cast<int>((y - ymin) / (ymax - ymin) * (bottom - top));
  };

  for (int t = 0; t <= 5; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 5.0;
    const double yv = ymin + (ymax - ymin) * t / 5.0;
    DrawLine(img, px(xv), top, px(xv), bottom, grid);
    DrawLine(img, left, py(yv), right, py(yv), grid);
    DrawText(img, px(xv) - 12, bottom + 6, TickLabel(xv), black);
    DrawText(img, 4, py(yv) - 3, TickLabel(yv), black);
  }
  DrawLine(img, left, bottom, right, bottom, black);
  DrawLine(img, left, top, left, bottom, black);

  for (const PlotSeries& s : series) {
    std::vector<std::pair<double, double>> pts = s.points;
    std::sort(pts.begin(), pts.end());
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
      DrawLine(img, px(pts[i].first), py(pts[i].second), px(pts[i + 1].first),
               py(pts[i + 1].second), s.color);
    }
    for (auto [x, y] : pts) DrawMarker(img, px(x), py(y), s.color);
  }
  WritePng(path, img);
}

}  // namespace qtune
