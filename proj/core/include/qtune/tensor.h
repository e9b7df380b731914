// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_TENSOR_H_
#define QTUNE_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace qtune {

// Dense row-major tensor of doubles. The shape is fixed at construction;
// rank 0 denotes a scalar (size 1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0)
      : shape_(std::move(shape)), v_(NumElements(shape_), fill) {}

  static Tensor FromValues(std::vector<int> shape, std::vector<double> values);
  static Tensor Scalar(double v) {
    Tensor t{std::vector<int>{}};
    t.v_[0] = v;
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  bool SameShape(const Tensor& o) const { return shape_ == o.shape_; }
  // True when o's shape equals the trailing dims of this tensor's shape
  // (rank-0 broadcasts against anything).
  bool SuffixOf(const Tensor& big) const;

  double ScalarValue() const { return v_.at(0); }

  std::string ShapeStr() const;

  static int64_t NumElements(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

}  // namespace qtune

#endif  // QTUNE_TENSOR_H_
