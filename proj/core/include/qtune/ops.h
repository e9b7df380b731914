// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_OPS_H_
#define QTUNE_OPS_H_

#include <vector>

#include "qtune/tape.h"
#include "qtune/tensor.h"

namespace qtune {
namespace ops {

// Elementwise binary ops. `b` may have a shape equal to a trailing suffix of
// `a`'s shape (including rank 0); it is then broadcast over the leading dims
// and its gradient is reduced over them.
Val Add(Val a, Val b);
Val Sub(Val a, Val b);
Val Mul(Val a, Val b);
Val Div(Val a, Val b);

Val AddScalar(Val a, double s);
Val MulScalar(Val a, double s);

Val Relu(Val a);
Val Abs(Val a);
Val Square(Val a);
// Elementwise max(a, c). Subgradient at a == c is 0.
Val MaxConst(Val a, double c);

// Forward: round half away from zero. Backward: identity Jacobian.
Val RoundSte(Val a);

Val Reshape(Val a, std::vector<int> shape);
Val Concat(const std::vector<Val>& xs, int axis);

Val ReduceSum(Val a);
Val ReduceMean(Val a);

// a: [m,k], b: [k,n] -> [m,n].
Val MatMul(Val a, Val b);
// x: [N,in], w: [out,in], bias: [out] (optional, pass invalid Val to skip).
Val Dense(Val x, Val w, Val bias);

// x: [N,C,H,W], w: [F,C,kh,kw], zero padding `pad`, stride `stride`.
Val Conv2d(Val x, Val w, int stride, int pad);
// Adjoint of Conv2d: x: [N,F,H,W], w: [F,C,kh,kw] -> [N,C,out_h,out_w].
Val Conv2dTranspose(Val x, Val w, int stride, int pad, int out_h, int out_w);

// Per-channel scale and shift: x[n,c,...] * gamma[c] + beta[c].
Val ChannelAffine(Val x, Val gamma, Val beta);

// x: [N,C,H,W] -> [N,C].
Val GlobalAvgPool(Val x);

// Mean over the batch of -log softmax(logits)[label]. logits: [N,C].
Val SoftmaxCrossEntropy(Val logits, std::vector<int> labels);

// 2x2 box mean over the last two dims: [...,H,W] -> [...,H/2,W/2].
Val AvgPool2(Val x);
// Bilinear 2x upsampling, sample-center alignment with edge replication:
// [...,H,W] -> [...,2H,2W].
Val BilinearUp2(Val x);

// [...,H,W] -> [L*bh*bw, 8, 8] in raster block order (H, W divisible by 8).
Val Blockify8(Val plane);
// Inverse of Blockify8 back to `plane_shape`.
Val Deblockify8(Val blocks, std::vector<int> plane_shape);

// Per 8x8 block: F = D * X * D^T with the orthonormal type-II DCT basis.
Val BlockDct(Val blocks);
// Per 8x8 block: X = D^T * F * D.
Val BlockIdct(Val blocks);

// f: [...,8,8], q: [8,8] broadcast over blocks. Forward f*q. Gradient to q is
// masked to zero where q == 0 (discarded frequencies stay discarded).
Val QuantScale(Val f, Val q);
// fq / q where q > 0, exactly 0 where q == 0; gradients masked the same way.
Val DequantScale(Val fq, Val q);

// m: [3,3], off: [3]; out = m(row,0)*a + m(row,1)*b + m(row,2)*c + off(row).
Val Linear3(Val a, Val b, Val c, Val m, Val off, int row);

// blocks: [batch*rows*cols, 8, 8] -> coefficient-channel map
// [batch, 64, rows, cols] (coefficient (u,v) becomes channel 8u+v).
Val BlocksToCoeffMap(Val blocks, int batch, int rows, int cols);

// Evaluation helpers (no tape involvement).
Tensor SoftmaxRows(const Tensor& logits);
double RoundHalfAway(double v);

}  // namespace ops
}  // namespace qtune

#endif  // QTUNE_OPS_H_
