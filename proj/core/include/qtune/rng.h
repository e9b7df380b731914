// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_RNG_H_
#define QTUNE_RNG_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qtune {

// Deterministic random source. Gaussian and shuffle are implemented here
// instead of through <random> distributions so that streams are pinned to
// the algorithm, not to the standard library build.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : eng_(seed) {}

  uint64_t NextU64() { return eng_(); }

  // Uniform in [0, 1).
  double NextDouble() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  uint64_t NextBelow(uint64_t n);

  // Standard normal via Box-Muller.
  double NextGaussian();

  void FillGaussian(double* out, int64_t n, double stddev);

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(NextBelow(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string SerializeState() const;
  void RestoreState(const std::string& s);

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qtune

#endif  // QTUNE_RNG_H_
