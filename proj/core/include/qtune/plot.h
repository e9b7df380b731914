// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_PLOT_H_
#define QTUNE_PLOT_H_

#include <array>
#include <string>
#include <vector>

namespace qtune {

// Minimal static chart renderer for rate-accuracy curves: axes with numeric
// tick labels, one polyline with markers per series.
struct PlotSeries {
  std::string name;
  std::array<uint8_t, 3> color{0, 0, 0};
  std::vector<std::pair<double, double>> points;
};

void WriteLinePlot(const std::string& path, const std::vector<PlotSeries>& series, int width = 720,
                   int height = 480);

}  // namespace qtune

#endif  // QTUNE_PLOT_H_
