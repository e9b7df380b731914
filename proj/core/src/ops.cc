// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/ops.h"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace qtune {
namespace ops {
namespace {

[[noreturn]] void ShapeError(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

void CheckSameTape(const char* op, Val a, Val b) {
  if (a.tape != b.tape) ShapeError(op, "operands recorded on different tapes");
}

// Row-major GEMM: C[m,n] (+)= A[m,k] * B[k,n], with optional transposes
// interpreted on the row-major matrices.
void Gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
          const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
}

int64_t LeadingCount(const Tensor& t, int trailing) {
  int64_t l = 1;
  for (int i = 0; i + trailing < t.rank(); ++i) l *= t.dim(i);
  return l;
}

}  // namespace

double RoundHalfAway(double v) { return std::round(v); }

namespace {

struct BinaryCtx {
  NodeId a, b, out;
};

template <typename DaF, typename DbF>
void BinaryBackward(Tape& tp, const BinaryCtx& c, DaF da_of, DbF db_of) {
  const Tensor& g = tp.grad(c.out);
  const Tensor& av = tp.value(c.a);
  const Tensor& bv = tp.value(c.b);
  const int64_t n = av.size();
  const int64_t bn = bv.size();
  if (tp.requires_grad(c.a)) {
    Tensor& da = tp.grad(c.a);
    for (int64_t i = 0; i < n; ++i) da[i] += da_of(g[i], av[i], bv[i % bn]);
  }
  if (tp.requires_grad(c.b)) {
    Tensor& db = tp.grad(c.b);
    for (int64_t i = 0; i < n; ++i) db[i % bn] += db_of(g[i], av[i], bv[i % bn]);
  }
}

template <typename FwdF>
Val MakeBinary(const char* op, Val a, Val b, FwdF fwd, Tape::BackwardFn (*mk)(BinaryCtx)) {
  CheckSameTape(op, a, b);
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  const Tensor& bv = t.value(b.id);
  if (!bv.SuffixOf(av)) {
    ShapeError(op, "shape " + bv.ShapeStr() + " does not broadcast against " + av.ShapeStr());
  }
  const int64_t n = av.size();
  const int64_t bn = bv.size();
  Tensor out(av.shape());
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % bn]);
  BinaryCtx ctx{a.id, b.id, static_cast<NodeId>(t.node_count())};
  return t.Emit(op, {a.id, b.id}, std::move(out), mk(ctx));
}

}  // namespace

Val Add(Val a, Val b) {
  return MakeBinary(
      "add", a, b, [](double x, double y) { return x + y; },
      +[](BinaryCtx c) -> Tape::BackwardFn {
        return [c](Tape& tp) {
          BinaryBackward(
              tp, c, [](double g, double, double) { return g; },
              [](double g, double, double) { return g; });
        };
      });
}

Val Sub(Val a, Val b) {
  return MakeBinary(
      "sub", a, b, [](double x, double y) { return x - y; },
      +[](BinaryCtx c) -> Tape::BackwardFn {
        return [c](Tape& tp) {
          BinaryBackward(
              tp, c, [](double g, double, double) { return g; },
              [](double g, double, double) { return -g; });
        };
      });
}

Val Mul(Val a, Val b) {
  return MakeBinary(
      "mul", a, b, [](double x, double y) { return x * y; },
      +[](BinaryCtx c) -> Tape::BackwardFn {
        return [c](Tape& tp) {
          BinaryBackward(
              tp, c, [](double g, double, double y) { return g * y; },
              [](double g, double x, double) { return g * x; });
        };
      });
}

Val Div(Val a, Val b) {
  return MakeBinary(
      "div", a, b, [](double x, double y) { return x / y; },
      +[](BinaryCtx c) -> Tape::BackwardFn {
        return [c](Tape& tp) {
          BinaryBackward(
              tp, c, [](double g, double, double y) { return g / y; },
              [](double g, double x, double y) { return -g * x / (y * y); });
        };
      });
}

namespace {

// Elementwise unary op.
template <typename FwdF, typename BwdF>
Val MakeUnary(const char* op, Val a, FwdF fwd, BwdF dfdx) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  NodeId ai = a.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit(op, {ai}, std::move(out), [ai, oi, dfdx](Tape& tp) {
    if (!tp.requires_grad(ai)) return;
    const Tensor& g = tp.grad(oi);
    const Tensor& x = tp.value(ai);
    Tensor& da = tp.grad(ai);
    for (int64_t i = 0; i < x.size(); ++i) da[i] += g[i] * dfdx(x[i]);
  });
}

}  // namespace

Val AddScalar(Val a, double s) {
  return MakeUnary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Val MulScalar(Val a, double s) {
  return MakeUnary(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Val Relu(Val a) {
  return MakeUnary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Val Abs(Val a) {
  return MakeUnary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Val Square(Val a) {
  return MakeUnary(
      "square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Val MaxConst(Val a, double c) {
  return MakeUnary(
      "max_const", a, [c](double x) { return x > c ? x : c; },
      [c](double x) { return x > c ? 1.0 : 0.0; });
}

Val RoundSte(Val a) {
  // Backward is the identity Jacobian regardless of the forward rounding.
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = std::round(av[i]);
  NodeId ai = a.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("round_ste", {ai}, std::move(out), [ai, oi](Tape& tp) {
    if (!tp.requires_grad(ai)) return;
    const Tensor& g = tp.grad(oi);
    Tensor& da = tp.grad(ai);
    for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Val Reshape(Val a, std::vector<int> shape) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  if (Tensor::NumElements(shape) != av.size()) {
    ShapeError("reshape", "cannot reshape " + av.ShapeStr() + " to new element count");
  }
  Tensor out = Tensor::FromValues(std::move(shape), av.values());
  NodeId ai = a.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("reshape", {ai}, std::move(out), [ai, oi](Tape& tp) {
    if (!tp.requires_grad(ai)) return;
    const Tensor& g = tp.grad(oi);
    Tensor& da = tp.grad(ai);
    for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Val Concat(const std::vector<Val>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  Tape& t = *xs[0].tape;
  const int rank = t.value(xs[0].id).rank();
  if (axis < 0 || axis >= rank) ShapeError("concat", "axis out of range");
  std::vector<int> out_shape = t.value(xs[0].id).shape();
  int axis_total = 0;
  for (const Val& v : xs) {
    const Tensor& tv = t.value(v.id);
    if (tv.rank() != rank) ShapeError("concat", "rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && tv.dim(d) != out_shape[static_cast<size_t>(d)]) {
        ShapeError("concat", "dim " + std::to_string(d) + " mismatch: " + tv.ShapeStr());
      }
    }
    axis_total += tv.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = axis_total;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[static_cast<size_t>(d)];

  Tensor out(out_shape);
  std::vector<NodeId> ids;
  std::vector<int64_t> spans;  // per-input axis_dim * inner
  int64_t out_row = static_cast<int64_t>(axis_total) * inner;
  int64_t off = 0;
  for (const Val& v : xs) {
    const Tensor& tv = t.value(v.id);
    int64_t span = static_cast<int64_t>(tv.dim(axis)) * inner;
    for (int64_t o = 0; o < outer; ++o) {
      std::memcpy(out.data() + o * out_row + off, tv.data() + o * span,
                  static_cast<size_t>(span) * sizeof(double));
    }
    ids.push_back(v.id);
    spans.push_back(span);
    off += span;
  }
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("concat", ids, std::move(out), [ids, spans, outer, out_row, oi](Tape& tp) {
    const Tensor& g = tp.grad(oi);
    int64_t off2 = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (tp.requires_grad(ids[i])) {
        Tensor& da = tp.grad(ids[i]);
        for (int64_t o = 0; o < outer; ++o) {
          const double* src = g.data() + o * out_row + off2;
          double* dst = da.data() + o * spans[i];
          for (int64_t k = 0; k < spans[i]; ++k) dst[k] += src[k];
        }
      }
      off2 += spans[i];
    }
  });
}

Val ReduceSum(Val a) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  double s = 0.0;
  for (int64_t i = 0; i < av.size(); ++i) s += av[i];
  NodeId ai = a.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("reduce_sum", {ai}, Tensor::Scalar(s), [ai, oi](Tape& tp) {
    if (!tp.requires_grad(ai)) return;
    double g = tp.grad(oi)[0];
    Tensor& da = tp.grad(ai);
    for (int64_t i = 0; i < da.size(); ++i) da[i] += g;
  });
}

Val ReduceMean(Val a) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  const int64_t n = av.size();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += av[i];
  NodeId ai = a.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("reduce_mean", {ai}, Tensor::Scalar(s / static_cast<double>(n)),
                [ai, oi, n](Tape& tp) {
                  if (!tp.requires_grad(ai)) return;
                  double g = tp.grad(oi)[0] / static_cast<double>(n);
                  Tensor& da = tp.grad(ai);
                  for (int64_t i = 0; i < n; ++i) da[i] += g;
                });
}

Val MatMul(Val a, Val b) {
  CheckSameTape("matmul", a, b);
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  const Tensor& bv = t.value(b.id);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    ShapeError("matmul", av.ShapeStr() + " x " + bv.ShapeStr());
  }
  const int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  Gemm(false, false, m, n, k, 1.0, av.data(), bv.data(), 0.0, out.data());
  NodeId ai = a.id, bi = b.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("matmul", {ai, bi}, std::move(out), [ai, bi, oi, m, n, k](Tape& tp) {
    const Tensor& g = tp.grad(oi);
    if (tp.requires_grad(ai)) {
      // dA = G * B^T
      Gemm(false, true, m, k, n, 1.0, g.data(), tp.value(bi).data(), 1.0, tp.grad(ai).data());
    }
    if (tp.requires_grad(bi)) {
      // dB = A^T * G
      Gemm(true, false, k, n, m, 1.0, tp.value(ai).data(), g.data(), 1.0, tp.grad(bi).data());
    }
  });
}

Val Dense(Val x, Val w, Val bias) {
  CheckSameTape("dense", x, w);
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x.id);
  const Tensor& wv = t.value(w.id);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1)) {
    ShapeError("dense", "x " + xv.ShapeStr() + " vs w " + wv.ShapeStr());
  }
  const int n = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(0);
  const bool has_bias = bias.valid();
  if (has_bias) {
    const Tensor& bv = t.value(bias.id);
    if (bv.rank() != 1 || bv.dim(0) != out_dim) ShapeError("dense", "bias " + bv.ShapeStr());
  }
  Tensor out({n, out_dim});
  Gemm(false, true, n, out_dim, in, 1.0, xv.data(), wv.data(), 0.0, out.data());
  if (has_bias) {
    const Tensor& bv = t.value(bias.id);
    for (int r = 0; r < n; ++r) {
      double* row = out.data() + static_cast<int64_t>(r) * out_dim;
      for (int c = 0; c < out_dim; ++c) row[c] += bv[c];
    }
  }
  std::vector<NodeId> ins{x.id, w.id};
  if (has_bias) ins.push_back(bias.id);
  NodeId xi = x.id, wi = w.id, bi2 = has_bias ? bias.id : -1;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("dense", ins, std::move(out), [xi, wi, bi2, oi, n, in, out_dim](Tape& tp) {
    const Tensor& g = tp.grad(oi);
    if (tp.requires_grad(xi)) {
      // dX = G * W
      Gemm(false, false, n, in, out_dim, 1.0, g.data(), tp.value(wi).data(), 1.0,
           tp.grad(xi).data());
    }
    if (tp.requires_grad(wi)) {
      // dW = G^T * X
      Gemm(true, false, out_dim, in, n, 1.0, g.data(), tp.value(xi).data(), 1.0,
           tp.grad(wi).data());
    }
    if (bi2 >= 0 && tp.requires_grad(bi2)) {
      Tensor& db = tp.grad(bi2);
      for (int r = 0; r < n; ++r) {
        const double* row = g.data() + static_cast<int64_t>(r) * out_dim;
        for (int c = 0; c < out_dim; ++c) db[c] += row[c];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution via im2col + GEMM, chunked over the batch to bound scratch.

namespace {

struct ConvGeom {
  int n, c, h, w;        // input
  int f, kh, kw;         // filters
  int stride, pad;
  int oh, ow;            // output
  int64_t patch() const { return static_cast<int64_t>(c) * kh * kw; }
  int64_t opix() const { return static_cast<int64_t>(oh) * ow; }
};

ConvGeom MakeConvGeom(const char* op, const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.rank() != 4 || w.rank() != 4) ShapeError(op, "expects rank-4 x and w");
  ConvGeom g;
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.f = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (w.dim(1) != g.c) {
    ShapeError(op, "channel mismatch: x " + x.ShapeStr() + " vs w " + w.ShapeStr());
  }
  if (stride < 1) ShapeError(op, "stride must be >= 1");
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
  if (g.oh <= 0 || g.ow <= 0) ShapeError(op, "kernel larger than padded input");
  return g;
}

int ChunkImages(const ConvGeom& g) {
  const int64_t per_image = g.patch() * g.opix();
  int chunk = static_cast<int>(std::max<int64_t>(1, (1 << 21) / std::max<int64_t>(per_image, 1)));
  return std::min(chunk, g.n);
}

// Writes patches of one image into cols[patch, opix] (column block layout).
void Im2ColImage(const ConvGeom& g, const double* img, double* cols, int64_t col_stride) {
  for (int c = 0; c < g.c; ++c) {
    const double* plane = img + static_cast<int64_t>(c) * g.h * g.w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        double* row = cols + ((static_cast<int64_t>(c) * g.kh + ki) * g.kw + kj) * col_stride;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          double* dst = row + static_cast<int64_t>(oy) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<int64_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Accumulates cols[patch, opix] back into one image (adjoint of Im2ColImage).
void Col2ImImage(const ConvGeom& g, const double* cols, int64_t col_stride, double* img) {
  for (int c = 0; c < g.c; ++c) {
    double* plane = img + static_cast<int64_t>(c) * g.h * g.w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        const double* row = cols + ((static_cast<int64_t>(c) * g.kh + ki) * g.kw + kj) * col_stride;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          const double* src = row + static_cast<int64_t>(oy) * g.ow;
          double* dst = plane + static_cast<int64_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Val Conv2d(Val x, Val w, int stride, int pad) {
  CheckSameTape("conv2d", x, w);
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x.id);
  const Tensor& wv = t.value(w.id);
  ConvGeom g = MakeConvGeom("conv2d", xv, wv, stride, pad);
  const int chunk = ChunkImages(g);
  const int64_t patch = g.patch(), opix = g.opix();

  Tensor out({g.n, g.f, g.oh, g.ow});
  std::vector<double> cols(static_cast<size_t>(patch * opix * chunk));
  std::vector<double> ybuf(static_cast<size_t>(g.f) * opix * chunk);
  for (int n0 = 0; n0 < g.n; n0 += chunk) {
    const int nb = std::min(chunk, g.n - n0);
    const int64_t cstride = opix * nb;
    for (int i = 0; i < nb; ++i) {
      Im2ColImage(g, xv.data() + static_cast<int64_t>(n0 + i) * g.c * g.h * g.w,
                  cols.data() + static_cast<int64_t>(i) * opix, cstride);
    }
    Gemm(false, false, g.f, static_cast<int>(cstride), static_cast<int>(patch), 1.0, wv.data(),
         cols.data(), 0.0, ybuf.data());
    // ybuf rows are filters; columns are (image, pixel). Scatter per image.
    for (int f = 0; f < g.f; ++f) {
      for (int i = 0; i < nb; ++i) {
        std::memcpy(out.data() + ((static_cast<int64_t>(n0 + i) * g.f + f) * opix),
                    ybuf.data() + static_cast<int64_t>(f) * cstride + static_cast<int64_t>(i) * opix,
                    static_cast<size_t>(opix) * sizeof(double));
      }
    }
  }

  NodeId xi = x.id, wi = w.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("conv2d", {xi, wi}, std::move(out), [xi, wi, oi, g, chunk](Tape& tp) {
    const Tensor& gy = tp.grad(oi);
    const Tensor& xv2 = tp.value(xi);
    const Tensor& wv2 = tp.value(wi);
    const int64_t patch = g.patch(), opix = g.opix();
    const bool need_dx = tp.requires_grad(xi);
    const bool need_dw = tp.requires_grad(wi);
    if (!need_dx && !need_dw) return;
    std::vector<double> cols(static_cast<size_t>(patch * opix * chunk));
    std::vector<double> gbuf(static_cast<size_t>(g.f) * opix * chunk);
    std::vector<double> dcols(need_dx ? static_cast<size_t>(patch * opix * chunk) : 0);
    for (int n0 = 0; n0 < g.n; n0 += chunk) {
      const int nb = std::min(chunk, g.n - n0);
      const int64_t cstride = opix * nb;
      // Gather dY into [f, (image, pixel)] layout.
      for (int f = 0; f < g.f; ++f) {
        for (int i = 0; i < nb; ++i) {
          std::memcpy(gbuf.data() + static_cast<int64_t>(f) * cstride + static_cast<int64_t>(i) * opix,
                      gy.data() + ((static_cast<int64_t>(n0 + i) * g.f + f) * opix),
                      static_cast<size_t>(opix) * sizeof(double));
        }
      }
      if (need_dw) {
        for (int i = 0; i < nb; ++i) {
          Im2ColImage(g, xv2.data() + static_cast<int64_t>(n0 + i) * g.c * g.h * g.w,
                      cols.data() + static_cast<int64_t>(i) * opix, cstride);
        }
        // dW += G * cols^T
        Gemm(false, true, g.f, static_cast<int>(patch), static_cast<int>(cstride), 1.0,
             gbuf.data(), cols.data(), 1.0, tp.grad(wi).data());
      }
      if (need_dx) {
        // dcols = W^T * G, then col2im.
        Gemm(true, false, static_cast<int>(patch), static_cast<int>(cstride), g.f, 1.0,
             wv2.data(), gbuf.data(), 0.0, dcols.data());
        Tensor& dx = tp.grad(xi);
        for (int i = 0; i < nb; ++i) {
          Col2ImImage(g, dcols.data() + static_cast<int64_t>(i) * opix, cstride,
                      dx.data() + static_cast<int64_t>(n0 + i) * g.c * g.h * g.w);
        }
      }
    }
  });
}

Val Conv2dTranspose(Val x, Val w, int stride, int pad, int out_h, int out_w) {
  CheckSameTape("conv2d_transpose", x, w);
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x.id);
  const Tensor& wv = t.value(w.id);
  if (xv.rank() != 4 || wv.rank() != 4) ShapeError("conv2d_transpose", "expects rank-4 x and w");
  if (xv.dim(1) != wv.dim(0)) {
    ShapeError("conv2d_transpose",
               "x channels " + xv.ShapeStr() + " must match w filters " + wv.ShapeStr());
  }
  // The op is the adjoint of Conv2d mapping [N,C,out_h,out_w] -> [N,F,h,w].
  Tensor ref({xv.dim(0), wv.dim(1), out_h, out_w});
  ConvGeom g = MakeConvGeom("conv2d_transpose", ref, wv, stride, pad);
  if (g.oh != xv.dim(2) || g.ow != xv.dim(3)) {
    ShapeError("conv2d_transpose", "input " + xv.ShapeStr() + " inconsistent with output " +
                                       std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const int chunk = ChunkImages(g);
  const int64_t patch = g.patch(), opix = g.opix();

  Tensor out({g.n, g.c, g.h, g.w});
  std::vector<double> xbuf(static_cast<size_t>(g.f) * opix * chunk);
  std::vector<double> dcols(static_cast<size_t>(patch * opix * chunk));
  for (int n0 = 0; n0 < g.n; n0 += chunk) {
    const int nb = std::min(chunk, g.n - n0);
    const int64_t cstride = opix * nb;
    for (int f = 0; f < g.f; ++f) {
      for (int i = 0; i < nb; ++i) {
        std::memcpy(xbuf.data() + static_cast<int64_t>(f) * cstride + static_cast<int64_t>(i) * opix,
                    xv.data() + ((static_cast<int64_t>(n0 + i) * g.f + f) * opix),
                    static_cast<size_t>(opix) * sizeof(double));
      }
    }
    Gemm(true, false, static_cast<int>(patch), static_cast<int>(cstride), g.f, 1.0, wv.data(),
         xbuf.data(), 0.0, dcols.data());
    for (int i = 0; i < nb; ++i) {
      Col2ImImage(g, dcols.data() + static_cast<int64_t>(i) * opix, cstride,
                  out.data() + static_cast<int64_t>(n0 + i) * g.c * g.h * g.w);
    }
  }

  NodeId xi = x.id, wi = w.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("conv2d_transpose", {xi, wi}, std::move(out), [xi, wi, oi, g, chunk](Tape& tp) {
    const Tensor& gy = tp.grad(oi);  // [N,C,out_h,out_w]
    const int64_t patch = g.patch(), opix = g.opix();
    const bool need_dx = tp.requires_grad(xi);
    const bool need_dw = tp.requires_grad(wi);
    if (!need_dx && !need_dw) return;
    std::vector<double> cols(static_cast<size_t>(patch * opix * chunk));
    std::vector<double> buf(static_cast<size_t>(g.f) * opix * chunk);
    for (int n0 = 0; n0 < g.n; n0 += chunk) {
      const int nb = std::min(chunk, g.n - n0);
      const int64_t cstride = opix * nb;
      for (int i = 0; i < nb; ++i) {
        Im2ColImage(g, gy.data() + static_cast<int64_t>(n0 + i) * g.c * g.h * g.w,
                    cols.data() + static_cast<int64_t>(i) * opix, cstride);
      }
      if (need_dx) {
        // dX = W * im2col(G)
        Gemm(false, false, g.f, static_cast<int>(cstride), static_cast<int>(patch), 1.0,
             tp.value(wi).data(), cols.data(), 0.0, buf.data());
        Tensor& dx = tp.grad(xi);
        for (int f = 0; f < g.f; ++f) {
          for (int i = 0; i < nb; ++i) {
            double* dst = dx.data() + ((static_cast<int64_t>(n0 + i) * g.f + f) * opix);
            const double* src =
                buf.data() + static_cast<int64_t>(f) * cstride + static_cast<int64_t>(i) * opix;
            for (int64_t k = 0; k < opix; ++k) dst[k] += src[k];
          }
        }
      }
      if (need_dw) {
        // dW += X * im2col(G)^T
        const Tensor& xv2 = tp.value(xi);
        for (int f = 0; f < g.f; ++f) {
          for (int i = 0; i < nb; ++i) {
            std::memcpy(buf.data() + static_cast<int64_t>(f) * cstride + static_cast<int64_t>(i) * opix,
                        xv2.data() + ((static_cast<int64_t>(n0 + i) * g.f + f) * opix),
                        static_cast<size_t>(opix) * sizeof(double));
          }
        }
        Gemm(false, true, g.f, static_cast<int>(patch), static_cast<int>(cstride), 1.0, buf.data(),
             cols.data(), 1.0, tp.grad(wi).data());
      }
    }
  });
}

Val ChannelAffine(Val x, Val gamma, Val beta) {
  CheckSameTape("channel_affine", x, gamma);
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x.id);
  const Tensor& gv = t.value(gamma.id);
  const Tensor& bv = t.value(beta.id);
  if (xv.rank() < 2) ShapeError("channel_affine", "x must have rank >= 2");
  const int c = xv.dim(1);
  if (gv.size() != c || bv.size() != c) {
    ShapeError("channel_affine", "gamma/beta size must equal channel dim " + std::to_string(c));
  }
  const int64_t n = xv.dim(0);
  int64_t inner = 1;
  for (int d = 2; d < xv.rank(); ++d) inner *= xv.dim(d);
  Tensor out(xv.shape());
  for (int64_t b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double gmul = gv[ch], badd = bv[ch];
      const double* src = xv.data() + (b * c + ch) * inner;
      double* dst = out.data() + (b * c + ch) * inner;
      for (int64_t k = 0; k < inner; ++k) dst[k] = src[k] * gmul + badd;
    }
  }
  NodeId xi = x.id, gi = gamma.id, bi = beta.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("channel_affine", {xi, gi, bi}, std::move(out),
                [xi, gi, bi, oi, n, c, inner](Tape& tp) {
                  const Tensor& g = tp.grad(oi);
                  const Tensor& xv2 = tp.value(xi);
                  const Tensor& gv2 = tp.value(gi);
                  const bool dx = tp.requires_grad(xi), dg = tp.requires_grad(gi),
                             db = tp.requires_grad(bi);
                  for (int64_t b = 0; b < n; ++b) {
                    for (int ch = 0; ch < c; ++ch) {
                      const int64_t off = (b * c + ch) * inner;
                      const double* gp = g.data() + off;
                      if (dx) {
                        double* dxp = tp.grad(xi).data() + off;
                        const double gmul = gv2[ch];
                        for (int64_t k = 0; k < inner; ++k) dxp[k] += gp[k] * gmul;
                      }
                      if (dg || db) {
                        const double* xp = xv2.data() + off;
                        double sg = 0.0, sb = 0.0;
                        for (int64_t k = 0; k < inner; ++k) {
                          sg += gp[k] * xp[k];
                          sb += gp[k];
                        }
                        if (dg) tp.grad(gi)[ch] += sg;
                        if (db) tp.grad(bi)[ch] += sb;
                      }
                    }
                  }
                });
}

Val GlobalAvgPool(Val x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x.id);
  if (xv.rank() != 4) ShapeError("global_avg_pool", "expects [N,C,H,W], got " + xv.ShapeStr());
  const int n = xv.dim(0), c = xv.dim(1);
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  Tensor out({n, c});
  for (int64_t i = 0; i < static_cast<int64_t>(n) * c; ++i) {
    const double* src = xv.data() + i * hw;
    double s = 0.0;
    for (int64_t k = 0; k < hw; ++k) s += src[k];
    out[i] = s / static_cast<double>(hw);
  }
  NodeId xi = x.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("global_avg_pool", {xi}, std::move(out), [xi, oi, n, c, hw](Tape& tp) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad(oi);
    Tensor& dx = tp.grad(xi);
    for (int64_t i = 0; i < static_cast<int64_t>(n) * c; ++i) {
      const double gv = g[i] / static_cast<double>(hw);
      double* dst = dx.data() + i * hw;
      for (int64_t k = 0; k < hw; ++k) dst[k] += gv;
    }
  });
}

Val SoftmaxCrossEntropy(Val logits, std::vector<int> labels) {
  Tape& t = *logits.tape;
  const Tensor& lv = t.value(logits.id);
  if (lv.rank() != 2) ShapeError("softmax_xent", "logits must be [N,C], got " + lv.ShapeStr());
  const int n = lv.dim(0), c = lv.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    ShapeError("softmax_xent", "labels count " + std::to_string(labels.size()) +
                                   " != batch " + std::to_string(n));
  }
  for (int lab : labels) {
    if (lab < 0 || lab >= c) ShapeError("softmax_xent", "label out of range");
  }
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* row = lv.data() + static_cast<int64_t>(r) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double se = 0.0;
    for (int j = 0; j < c; ++j) se += std::exp(row[j] - mx);
    total += mx + std::log(se) - row[labels[static_cast<size_t>(r)]];
  }
  const double loss = n > 0 ? total / n : 0.0;
  NodeId li = logits.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("softmax_xent", {li}, Tensor::Scalar(loss),
                [li, oi, n, c, labels = std::move(labels)](Tape& tp) {
                  if (!tp.requires_grad(li)) return;
                  const double gs = tp.grad(oi)[0] / std::max(n, 1);
                  const Tensor& lv2 = tp.value(li);
                  Tensor& dl = tp.grad(li);
                  for (int r = 0; r < n; ++r) {
                    const double* row = lv2.data() + static_cast<int64_t>(r) * c;
                    double* drow = dl.data() + static_cast<int64_t>(r) * c;
                    double mx = row[0];
                    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
                    double se = 0.0;
                    for (int j = 0; j < c; ++j) se += std::exp(row[j] - mx);
                    for (int j = 0; j < c; ++j) {
                      double p = std::exp(row[j] - mx) / se;
                      drow[j] += gs * (p - (j == labels[static_cast<size_t>(r)] ? 1.0 : 0.0));
                    }
                  }
                });
}

Val AvgPool2(Val x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x.id);
  if (xv.rank() < 2) ShapeError("avg_pool2", "rank must be >= 2");
  const int h = xv.dim(xv.rank() - 2), w = xv.dim(xv.rank() - 1);
  if (h % 2 != 0 || w % 2 != 0) {
    ShapeError("avg_pool2", "spatial dims must be even, got " + xv.ShapeStr());
  }
  const int64_t l = LeadingCount(xv, 2);
  std::vector<int> oshape = xv.shape();
  oshape[oshape.size() - 2] = h / 2;
  oshape[oshape.size() - 1] = w / 2;
  Tensor out(oshape);
  const int oh = h / 2, ow = w / 2;
  for (int64_t p = 0; p < l; ++p) {
    const double* src = xv.data() + p * h * w;
    double* dst = out.data() + p * static_cast<int64_t>(oh) * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        const double* s = src + (2 * y) * w + 2 * xx;
        dst[y * ow + xx] = 0.25 * (s[0] + s[1] + s[w] + s[w + 1]);
      }
    }
  }
  NodeId xi = x.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("avg_pool2", {xi}, std::move(out), [xi, oi, l, h, w](Tape& tp) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad(oi);
    Tensor& dx = tp.grad(xi);
    const int oh = h / 2, ow = w / 2;
    for (int64_t p = 0; p < l; ++p) {
      const double* gp = g.data() + p * static_cast<int64_t>(oh) * ow;
      double* dp = dx.data() + p * h * w;
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          const double q = 0.25 * gp[y * ow + xx];
          double* d = dp + (2 * y) * w + 2 * xx;
          d[0] += q;
          d[1] += q;
          d[w] += q;
          d[w + 1] += q;
        }
      }
    }
  });
}

namespace {

// Interpolation taps for one axis of 2x upsampling with sample-center
// alignment and edge replication.
struct UpTaps {
  std::vector<int> lo, hi;
  std::vector<double> t;
};

UpTaps MakeUpTaps(int in_size) {
  UpTaps u;
  const int out = 2 * in_size;
  u.lo.resize(static_cast<size_t>(out));
  u.hi.resize(static_cast<size_t>(out));
  u.t.resize(static_cast<size_t>(out));
  for (int i = 0; i < out; ++i) {
    const double src = (i + 0.5) / 2.0 - 0.5;
    const double f = std::floor(src);
    int a = static_cast<int>(f);
    double tt = src - f;
    int b = a + 1;
    a = std::clamp(a, 0, in_size - 1);
    b = std::clamp(b, 0, in_size - 1);
    u.lo[static_cast<size_t>(i)] = a;
    u.hi[static_cast<size_t>(i)] = b;
    u.t[static_cast<size_t>(i)] = tt;
  }
  return u;
}

}  // namespace

Val BilinearUp2(Val x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x.id);
  if (xv.rank() < 2) ShapeError("bilinear_up2", "rank must be >= 2");
  const int h = xv.dim(xv.rank() - 2), w = xv.dim(xv.rank() - 1);
  const int64_t l = LeadingCount(xv, 2);
  std::vector<int> oshape = xv.shape();
  oshape[oshape.size() - 2] = 2 * h;
  oshape[oshape.size() - 1] = 2 * w;
  Tensor out(oshape);
  const UpTaps uy = MakeUpTaps(h), ux = MakeUpTaps(w);
  for (int64_t p = 0; p < l; ++p) {
    const double* src = xv.data() + p * h * w;
    double* dst = out.data() + p * static_cast<int64_t>(2 * h) * (2 * w);
    for (int oy = 0; oy < 2 * h; ++oy) {
      const double ty = uy.t[static_cast<size_t>(oy)];
      const double* r0 = src + static_cast<int64_t>(uy.lo[static_cast<size_t>(oy)]) * w;
      const double* r1 = src + static_cast<int64_t>(uy.hi[static_cast<size_t>(oy)]) * w;
      double* drow = dst + static_cast<int64_t>(oy) * (2 * w);
      for (int ox = 0; ox < 2 * w; ++ox) {
        const double tx = ux.t[static_cast<size_t>(ox)];
        const int a = ux.lo[static_cast<size_t>(ox)], b = ux.hi[static_cast<size_t>(ox)];
        const double top = (1.0 - tx) * r0[a] + tx * r0[b];
        const double bot = (1.0 - tx) * r1[a] + tx * r1[b];
        drow[ox] = (1.0 - ty) * top + ty * bot;
      }
    }
  }
  NodeId xi = x.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("bilinear_up2", {xi}, std::move(out), [xi, oi, l, h, w](Tape& tp) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad(oi);
    Tensor& dx = tp.grad(xi);
    const UpTaps uy = MakeUpTaps(h), ux = MakeUpTaps(w);
    for (int64_t p = 0; p < l; ++p) {
      const double* gp = g.data() + p * static_cast<int64_t>(2 * h) * (2 * w);
      double* dp = dx.data() + p * h * w;
      for (int oy = 0; oy < 2 * h; ++oy) {
        const double ty = uy.t[static_cast<size_t>(oy)];
        const int ya = uy.lo[static_cast<size_t>(oy)], yb = uy.hi[static_cast<size_t>(oy)];
        const double* grow = gp + static_cast<int64_t>(oy) * (2 * w);
        for (int ox = 0; ox < 2 * w; ++ox) {
          const double tx = ux.t[static_cast<size_t>(ox)];
          const int xa = ux.lo[static_cast<size_t>(ox)], xb = ux.hi[static_cast<size_t>(ox)];
          const double gv = grow[ox];
          dp[ya * w + xa] += (1.0 - ty) * (1.0 - tx) * gv;
          dp[ya * w + xb] += (1.0 - ty) * tx * gv;
          dp[yb * w + xa] += ty * (1.0 - tx) * gv;
          dp[yb * w + xb] += ty * tx * gv;
        }
      }
    }
  });
}

namespace {

struct BlockGeom {
  int64_t l;
  int h, w, bh, bw;
};

BlockGeom MakeBlockGeom(const char* op, const Tensor& plane) {
  if (plane.rank() < 2) ShapeError(op, "rank must be >= 2");
  BlockGeom g;
  g.h = plane.dim(plane.rank() - 2);
  g.w = plane.dim(plane.rank() - 1);
  if (g.h % 8 != 0 || g.w % 8 != 0) {
    ShapeError(op, "spatial dims must be multiples of 8, got " + plane.ShapeStr());
  }
  g.l = LeadingCount(plane, 2);
  g.bh = g.h / 8;
  g.bw = g.w / 8;
  return g;
}

void ScatterBlocks(const BlockGeom& g, const double* plane, double* blocks, bool to_blocks) {
  for (int64_t p = 0; p < g.l; ++p) {
    const int64_t pbase = p * g.h * g.w;
    for (int br = 0; br < g.bh; ++br) {
      for (int bc = 0; bc < g.bw; ++bc) {
        const int64_t bbase = (((p * g.bh) + br) * g.bw + bc) * 64;
        for (int u = 0; u < 8; ++u) {
          const int64_t prow = pbase + static_cast<int64_t>(br * 8 + u) * g.w + bc * 8;
          if (to_blocks) {
            std::memcpy(blocks + bbase + u * 8, plane + prow, 8 * sizeof(double));
          } else {
            std::memcpy(const_cast<double*>(plane) + prow, blocks + bbase + u * 8,
                        8 * sizeof(double));
          }
        }
      }
    }
  }
}

void AccumBlocksToPlane(const BlockGeom& g, const double* blocks, double* plane) {
  for (int64_t p = 0; p < g.l; ++p) {
    const int64_t pbase = p * g.h * g.w;
    for (int br = 0; br < g.bh; ++br) {
      for (int bc = 0; bc < g.bw; ++bc) {
        const int64_t bbase = (((p * g.bh) + br) * g.bw + bc) * 64;
        for (int u = 0; u < 8; ++u) {
          double* dst = plane + pbase + static_cast<int64_t>(br * 8 + u) * g.w + bc * 8;
          const double* src = blocks + bbase + u * 8;
          for (int v = 0; v < 8; ++v) dst[v] += src[v];
        }
      }
    }
  }
}

void AccumPlaneToBlocks(const BlockGeom& g, const double* plane, double* blocks) {
  for (int64_t p = 0; p < g.l; ++p) {
    const int64_t pbase = p * g.h * g.w;
    for (int br = 0; br < g.bh; ++br) {
      for (int bc = 0; bc < g.bw; ++bc) {
        double* dst = blocks + (((p * g.bh) + br) * g.bw + bc) * 64;
        for (int u = 0; u < 8; ++u) {
          const double* src = plane + pbase + static_cast<int64_t>(br * 8 + u) * g.w + bc * 8;
          for (int v = 0; v < 8; ++v) dst[u * 8 + v] += src[v];
        }
      }
    }
  }
}

}  // namespace

Val Blockify8(Val plane) {
  Tape& t = *plane.tape;
  const Tensor& pv = t.value(plane.id);
  BlockGeom g = MakeBlockGeom("blockify8", pv);
  Tensor out({static_cast<int>(g.l * g.bh * g.bw), 8, 8});
  ScatterBlocks(g, pv.data(), out.data(), true);
  NodeId pi = plane.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("blockify8", {pi}, std::move(out), [pi, oi, g](Tape& tp) {
    if (!tp.requires_grad(pi)) return;
    AccumBlocksToPlane(g, tp.grad(oi).data(), tp.grad(pi).data());
  });
}

Val Deblockify8(Val blocks, std::vector<int> plane_shape) {
  Tape& t = *blocks.tape;
  const Tensor& bv = t.value(blocks.id);
  Tensor probe(plane_shape);
  BlockGeom g = MakeBlockGeom("deblockify8", probe);
  if (bv.size() != g.l * g.h * g.w) {
    ShapeError("deblockify8", "block count " + bv.ShapeStr() + " does not tile plane");
  }
  Tensor out(plane_shape);
  ScatterBlocks(g, out.data(), const_cast<double*>(bv.data()), false);
  NodeId bi = blocks.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("deblockify8", {bi}, std::move(out), [bi, oi, g](Tape& tp) {
    if (!tp.requires_grad(bi)) return;
    AccumPlaneToBlocks(g, tp.grad(oi).data(), tp.grad(bi).data());
  });
}

// ---------------------------------------------------------------------------
// Blockwise orthonormal type-II DCT.

namespace {

const double* Dct8Basis() {
  static const std::vector<double> d = [] {
    std::vector<double> m(64);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < 8; ++i) {
      const double scale = i == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      for (int j = 0; j < 8; ++j) {
        m[static_cast<size_t>(i * 8 + j)] = scale * std::cos((2 * j + 1) * i * pi / 16.0);
      }
    }
    return m;
  }();
  return d.data();
}

// out = D * X * D^T
void Dct8Block(const double* x, double* out) {
  const double* d = Dct8Basis();
  double tmp[64];
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += d[i * 8 + k] * x[k * 8 + j];
      tmp[i * 8 + j] = s;
    }
  }
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += tmp[i * 8 + k] * d[j * 8 + k];
      out[i * 8 + j] = s;
    }
  }
}

// out = D^T * F * D
void Idct8Block(const double* f, double* out) {
  const double* d = Dct8Basis();
  double tmp[64];
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += d[k * 8 + i] * f[k * 8 + j];
      tmp[i * 8 + j] = s;
    }
  }
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += tmp[i * 8 + k] * d[k * 8 + j];
      out[i * 8 + j] = s;
    }
  }
}

void CheckBlocks(const char* op, const Tensor& v) {
  if (v.rank() < 2 || v.dim(v.rank() - 1) != 8 || v.dim(v.rank() - 2) != 8) {
    ShapeError(op, "expects [...,8,8], got " + v.ShapeStr());
  }
}

}  // namespace

Val BlockDct(Val blocks) {
  Tape& t = *blocks.tape;
  const Tensor& bv = t.value(blocks.id);
  CheckBlocks("block_dct", bv);
  const int64_t nb = bv.size() / 64;
  Tensor out(bv.shape());
  for (int64_t i = 0; i < nb; ++i) Dct8Block(bv.data() + i * 64, out.data() + i * 64);
  NodeId bi = blocks.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("block_dct", {bi}, std::move(out), [bi, oi, nb](Tape& tp) {
    if (!tp.requires_grad(bi)) return;
    const Tensor& g = tp.grad(oi);
    Tensor& db = tp.grad(bi);
    double buf[64];
    for (int64_t i = 0; i < nb; ++i) {
      Idct8Block(g.data() + i * 64, buf);
      double* dst = db.data() + i * 64;
      for (int k = 0; k < 64; ++k) dst[k] += buf[k];
    }
  });
}

Val BlockIdct(Val blocks) {
  Tape& t = *blocks.tape;
  const Tensor& bv = t.value(blocks.id);
  CheckBlocks("block_idct", bv);
  const int64_t nb = bv.size() / 64;
  Tensor out(bv.shape());
  for (int64_t i = 0; i < nb; ++i) Idct8Block(bv.data() + i * 64, out.data() + i * 64);
  NodeId bi = blocks.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("block_idct", {bi}, std::move(out), [bi, oi, nb](Tape& tp) {
    if (!tp.requires_grad(bi)) return;
    const Tensor& g = tp.grad(oi);
    Tensor& db = tp.grad(bi);
    double buf[64];
    for (int64_t i = 0; i < nb; ++i) {
      Dct8Block(g.data() + i * 64, buf);
      double* dst = db.data() + i * 64;
      for (int k = 0; k < 64; ++k) dst[k] += buf[k];
    }
  });
}

Val QuantScale(Val f, Val q) {
  CheckSameTape("quant_scale", f, q);
  Tape& t = *f.tape;
  const Tensor& fv = t.value(f.id);
  const Tensor& qv = t.value(q.id);
  CheckBlocks("quant_scale", fv);
  if (qv.size() != 64) ShapeError("quant_scale", "kernel must be 8x8, got " + qv.ShapeStr());
  for (int k = 0; k < 64; ++k) {
    if (qv[k] < 0.0) {
      throw std::invalid_argument("quant_scale: negative kernel entry at index " +
                                  std::to_string(k));
    }
  }
  const int64_t nb = fv.size() / 64;
  Tensor out(fv.shape());
  for (int64_t i = 0; i < nb; ++i) {
    const double* src = fv.data() + i * 64;
    double* dst = out.data() + i * 64;
    for (int k = 0; k < 64; ++k) dst[k] = src[k] * qv[k];
  }
  NodeId fi = f.id, qi = q.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("quant_scale", {fi, qi}, std::move(out), [fi, qi, oi, nb](Tape& tp) {
    const Tensor& g = tp.grad(oi);
    const Tensor& fv2 = tp.value(fi);
    const Tensor& qv2 = tp.value(qi);
    if (tp.requires_grad(fi)) {
      Tensor& df = tp.grad(fi);
      for (int64_t i = 0; i < nb; ++i) {
        const double* gp = g.data() + i * 64;
        double* dp = df.data() + i * 64;
        for (int k = 0; k < 64; ++k) dp[k] += gp[k] * qv2[k];
      }
    }
    if (tp.requires_grad(qi)) {
      Tensor& dq = tp.grad(qi);
      for (int64_t i = 0; i < nb; ++i) {
        const double* gp = g.data() + i * 64;
        const double* fp = fv2.data() + i * 64;
        for (int k = 0; k < 64; ++k) {
          if (qv2[k] != 0.0) dq[k] += gp[k] * fp[k];
        }
      }
    }
  });
}

Val DequantScale(Val fq, Val q) {
  CheckSameTape("dequant_scale", fq, q);
  Tape& t = *fq.tape;
  const Tensor& fv = t.value(fq.id);
  const Tensor& qv = t.value(q.id);
  CheckBlocks("dequant_scale", fv);
  if (qv.size() != 64) ShapeError("dequant_scale", "kernel must be 8x8, got " + qv.ShapeStr());
  const int64_t nb = fv.size() / 64;
  Tensor out(fv.shape());
  for (int64_t i = 0; i < nb; ++i) {
    const double* src = fv.data() + i * 64;
    double* dst = out.data() + i * 64;
    for (int k = 0; k < 64; ++k) dst[k] = qv[k] > 0.0 ? src[k] / qv[k] : 0.0;
  }
  NodeId fi = fq.id, qi = q.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("dequant_scale", {fi, qi}, std::move(out), [fi, qi, oi, nb](Tape& tp) {
    const Tensor& g = tp.grad(oi);
    const Tensor& fv2 = tp.value(fi);
    const Tensor& qv2 = tp.value(qi);
    if (tp.requires_grad(fi)) {
      Tensor& df = tp.grad(fi);
      for (int64_t i = 0; i < nb; ++i) {
        const double* gp = g.data() + i * 64;
        double* dp = df.data() + i * 64;
        for (int k = 0; k < 64; ++k) {
          if (qv2[k] > 0.0) dp[k] += gp[k] / qv2[k];
        }
      }
    }
    if (tp.requires_grad(qi)) {
      Tensor& dq = tp.grad(qi);
      for (int64_t i = 0; i < nb; ++i) {
        const double* gp = g.data() + i * 64;
        const double* fp = fv2.data() + i * 64;
        for (int k = 0; k < 64; ++k) {
          if (qv2[k] > 0.0) dq[k] -= gp[k] * fp[k] / (qv2[k] * qv2[k]);
        }
      }
    }
  });
}

Val Linear3(Val a, Val b, Val c, Val m, Val off, int row) {
  CheckSameTape("linear3", a, b);
  CheckSameTape("linear3", a, c);
  CheckSameTape("linear3", a, m);
  Tape& t = *a.tape;
  const Tensor& av = t.value(a.id);
  const Tensor& bv = t.value(b.id);
  const Tensor& cv = t.value(c.id);
  const Tensor& mv = t.value(m.id);
  const Tensor& ov = t.value(off.id);
  if (!av.SameShape(bv) || !av.SameShape(cv)) {
    ShapeError("linear3", "plane shapes differ: " + av.ShapeStr() + " " + bv.ShapeStr() + " " +
                              cv.ShapeStr());
  }
  if (mv.size() != 9 || ov.size() != 3) ShapeError("linear3", "matrix must be 3x3, offset 3");
  if (row < 0 || row > 2) ShapeError("linear3", "row out of range");
  const double m0 = mv[row * 3 + 0], m1 = mv[row * 3 + 1], m2 = mv[row * 3 + 2], o0 = ov[row];
  const int64_t n = av.size();
  Tensor out(av.shape());
  for (int64_t i = 0; i < n; ++i) out[i] = m0 * av[i] + m1 * bv[i] + m2 * cv[i] + o0;
  NodeId ai = a.id, bi = b.id, ci = c.id, mi = m.id, offi = off.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("linear3", {ai, bi, ci, mi, offi}, std::move(out),
                [ai, bi, ci, mi, offi, oi, row, n](Tape& tp) {
                  const Tensor& g = tp.grad(oi);
                  const Tensor& mv2 = tp.value(mi);
                  const NodeId planes[3] = {ai, bi, ci};
                  for (int j = 0; j < 3; ++j) {
                    if (tp.requires_grad(planes[j])) {
                      const double mj = mv2[row * 3 + j];
                      Tensor& dp = tp.grad(planes[j]);
                      for (int64_t i = 0; i < n; ++i) dp[i] += g[i] * mj;
                    }
                  }
                  if (tp.requires_grad(mi)) {
                    Tensor& dm = tp.grad(mi);
                    for (int j = 0; j < 3; ++j) {
                      const Tensor& pv = tp.value(planes[j]);
                      double s = 0.0;
                      for (int64_t i = 0; i < n; ++i) s += g[i] * pv[i];
                      dm[row * 3 + j] += s;
                    }
                  }
                  if (tp.requires_grad(offi)) {
                    double s = 0.0;
                    for (int64_t i = 0; i < n; ++i) s += g[i];
                    tp.grad(offi)[row] += s;
                  }
                });
}

Val BlocksToCoeffMap(Val blocks, int batch, int rows, int cols) {
  Tape& t = *blocks.tape;
  const Tensor& bv = t.value(blocks.id);
  CheckBlocks("blocks_to_coeffmap", bv);
  if (bv.size() != static_cast<int64_t>(batch) * rows * cols * 64) {
    ShapeError("blocks_to_coeffmap", "block count mismatch for " + std::to_string(batch) + "x" +
                                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor out({batch, 64, rows, cols});
  for (int n = 0; n < batch; ++n) {
    for (int r = 0; r < rows; ++r) {
      for (int cc = 0; cc < cols; ++cc) {
        const double* src = bv.data() + ((static_cast<int64_t>(n) * rows + r) * cols + cc) * 64;
        for (int k = 0; k < 64; ++k) {
          out[((static_cast<int64_t>(n) * 64 + k) * rows + r) * cols + cc] = src[k];
        }
      }
    }
  }
  NodeId bi = blocks.id;
  NodeId oi = static_cast<NodeId>(t.node_count());
  return t.Emit("blocks_to_coeffmap", {bi}, std::move(out),
                [bi, oi, batch, rows, cols](Tape& tp) {
                  if (!tp.requires_grad(bi)) return;
                  const Tensor& g = tp.grad(oi);
                  Tensor& db = tp.grad(bi);
                  for (int n = 0; n < batch; ++n) {
                    for (int r = 0; r < rows; ++r) {
                      for (int cc = 0; cc < cols; ++cc) {
                        double* dst =
                            db.data() + ((static_cast<int64_t>(n) * rows + r) * cols + cc) * 64;
                        for (int k = 0; k < 64; ++k) {
                          dst[k] += g[((static_cast<int64_t>(n) * 64 + k) * rows + r) * cols + cc];
                        }
                      }
                    }
                  }
                });
}

Tensor SoftmaxRows(const Tensor& logits) {
  Tensor out(logits.shape());
  const int n = logits.dim(0), c = logits.dim(1);
  for (int r = 0; r < n; ++r) {
    const double* row = logits.data() + static_cast<int64_t>(r) * c;
    double* orow = out.data() + static_cast<int64_t>(r) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double se = 0.0;
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      se += orow[j];
    }
    for (int j = 0; j < c; ++j) orow[j] /= se;
  }
  return out;
}

}  // namespace ops
}  // namespace qtune
