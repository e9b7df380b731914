// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "qtune/metrics.h"
#include "qtune/rng.h"

using namespace qtune;

namespace {

ImageRGB RandomImage(Rng& rng, int h, int w) {
  ImageRGB img(h, w);
  for (int c = 0; c < 3; ++c) {
    for (double& v : img.plane(c).v) v = 255.0 * rng.NextDouble();
  }
  return img;
}

}  // namespace

TEST_CASE("psnr: identity gives the infinity sentinel") {
  Rng rng(70);
  ImageRGB img = RandomImage(rng, 24, 24);
  CHECK(Psnr(img, img) == std::numeric_limits<double>::infinity());
}

TEST_CASE("psnr: unit mse is 48.1308 dB") {
  Rng rng(71);
  ImageRGB img = RandomImage(rng, 20, 20);
  ImageRGB off = img;
  for (int c = 0; c < 3; ++c) {
    for (double& v : off.plane(c).v) v += 1.0;
  }
  CHECK(Psnr(img, off) == doctest::Approx(48.1308).epsilon(1e-4));
}

TEST_CASE("psnr: decreases as noise grows") {
  Rng rng(72);
  ImageRGB img = RandomImage(rng, 32, 32);
  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {1.0, 4.0, 16.0}) {
    Rng noise(123);
    ImageRGB noisy = img;
    for (int c = 0; c < 3; ++c) {
      for (double& v : noisy.plane(c).v) v += sigma * noise.NextGaussian();
    }
    const double p = Psnr(img, noisy);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("psnr: dimension mismatch rejected") {
  ImageRGB a(16, 16), b(16, 24);
  CHECK_THROWS_AS(Psnr(a, b), std::invalid_argument);
  CHECK_THROWS_AS(Ssim(a, b), std::invalid_argument);
}

TEST_CASE("ssim: identical images give exactly 1") {
  Rng rng(73);
  ImageRGB img = RandomImage(rng, 24, 24);
  CHECK(Ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim: constant black vs constant white is near zero") {
  ImageRGB black(24, 24);
  ImageRGB white(24, 24);
  for (int c = 0; c < 3; ++c) white.plane(c) = Plane(24, 24, 255.0);
  const double s = Ssim(black, white);
  CHECK(s >= 0.0);
  CHECK(s <= 0.01);
}

TEST_CASE("ssim: symmetric and bounded") {
  Rng rng(74);
  for (int trial = 0; trial < 25; ++trial) {
    ImageRGB a = RandomImage(rng, 16, 20);
    ImageRGB b = RandomImage(rng, 16, 20);
    const double ab = Ssim(a, b);
    const double ba = Ssim(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
    CHECK(Ssim(a, a) == doctest::Approx(1.0));
  }
}
