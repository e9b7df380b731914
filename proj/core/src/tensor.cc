// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/tensor.h"

#include <stdexcept>

namespace qtune {

int64_t Tensor::NumElements(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
    n *= d;
  }
  return n;
}

Tensor Tensor::FromValues(std::vector<int> shape, std::vector<double> values) {
  if (NumElements(shape) != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("Tensor::FromValues: size mismatch");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.v_ = std::move(values);
  return t;
}

bool Tensor::SuffixOf(const Tensor& big) const {
  if (rank() > big.rank()) return false;
  int off = big.rank() - rank();
  for (int i = 0; i < rank(); ++i) {
    if (shape_[static_cast<size_t>(i)] != big.shape()[static_cast<size_t>(off + i)]) return false;
  }
  return true;
}

std::string Tensor::ShapeStr() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  s += "]";
  return s;
}

}  // namespace qtune
