// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/classifier.h"

#include <cmath>
#include <stdexcept>

#include "qtune/rng.h"

namespace qtune {

using namespace ops;

void ClassifierConfig::Validate() const {
  if (num_classes < 2) throw std::invalid_argument("ClassifierConfig: num_classes must be >= 2");
  if (width_multiplier < 1) throw std::invalid_argument("ClassifierConfig: k must be >= 1");
  if (blocks_per_group < 1) throw std::invalid_argument("ClassifierConfig: blocks must be >= 1");
  if (frontend_channels < 1) {
    throw std::invalid_argument("ClassifierConfig: frontend_channels must be >= 1");
  }
}

namespace {

Tensor HeConv(Rng& rng, int out_ch, int in_ch, int k) {
  Tensor w({out_ch, in_ch, k, k});
  rng.FillGaussian(w.data(), w.size(), std::sqrt(2.0 / (in_ch * k * k)));
  return w;
}

}  // namespace

Classifier::Classifier(const ClassifierConfig& cfg) : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(cfg_.seed);
  const int k = cfg_.width_multiplier;
  const std::array<int, 3> widths = {16 * k, 32 * k, 64 * k};
  const int in_ch = cfg_.input_mode == InputMode::kPixel ? 3 : 64 + 2 * cfg_.frontend_channels;

  if (cfg_.input_mode == InputMode::kDct) {
    // Transposed-conv weights are [in=64, out=frontend_channels, 3, 3].
    fe_cb_w_ = Param("cls.fe.cb.w", Tensor({64, cfg_.frontend_channels, 3, 3}));
    fe_cr_w_ = Param("cls.fe.cr.w", Tensor({64, cfg_.frontend_channels, 3, 3}));
    rng.FillGaussian(fe_cb_w_.value.data(), fe_cb_w_.value.size(), std::sqrt(2.0 / (64 * 9)));
    rng.FillGaussian(fe_cr_w_.value.data(), fe_cr_w_.value.size(), std::sqrt(2.0 / (64 * 9)));
  }

  auto make_unit = [&](const std::string& name, int out_c, int in_c, int ksize, int stride) {
    ConvUnit u;
    u.w = Param(name + ".w", HeConv(rng, out_c, in_c, ksize));
    u.gamma = Param(name + ".gamma", Tensor({out_c}, 1.0));
    u.beta = Param(name + ".beta", Tensor({out_c}, 0.0));
    u.stride = stride;
    return u;
  };

  stem_ = make_unit("cls.stem", widths[0], in_ch, 3, 1);

  int cur = widths[0];
  groups_.resize(3);
  for (int g = 0; g < 3; ++g) {
    const int w = widths[static_cast<size_t>(g)];
    for (int b = 0; b < cfg_.blocks_per_group; ++b) {
      const int stride = (g > 0 && b == 0) ? 2 : 1;
      const std::string base = "cls.g" + std::to_string(g) + ".b" + std::to_string(b);
      ResBlock blk;
      blk.conv1 = make_unit(base + ".conv1", w, cur, 3, stride);
      blk.conv2 = make_unit(base + ".conv2", w, w, 3, 1);
      if (stride != 1 || cur != w) {
        blk.proj = Param(base + ".proj.w", HeConv(rng, w, cur, 1));
      }
      groups_[static_cast<size_t>(g)].push_back(std::move(blk));
      cur = w;
    }
  }

  // Small head init keeps the initial predictive distribution near uniform.
  head_w_ = Param("cls.head.w", Tensor({cfg_.num_classes, cur}));
  rng.FillGaussian(head_w_.value.data(), head_w_.value.size(), 0.01);
  head_b_ = Param("cls.head.b", Tensor({cfg_.num_classes}, 0.0));

  if (cfg_.input_mode == InputMode::kDct) {
    params_.push_back(&fe_cb_w_);
    params_.push_back(&fe_cr_w_);
  }
  auto push_unit = [this](ConvUnit& u) {
    params_.push_back(&u.w);
    params_.push_back(&u.gamma);
    params_.push_back(&u.beta);
  };
  push_unit(stem_);
  for (auto& g : groups_) {
    for (auto& blk : g) {
      push_unit(blk.conv1);
      push_unit(blk.conv2);
      if (blk.proj) params_.push_back(&*blk.proj);
    }
  }
  params_.push_back(&head_w_);
  params_.push_back(&head_b_);
}

std::vector<Param*> Classifier::Params() { return params_; }

int64_t Classifier::ParamCount() const {
  int64_t n = 0;
  for (const Param* p : params_) n += p->value.size();
  return n;
}

void Classifier::CheckFinite(const Tensor& t, const std::string& where) const {
  for (int64_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw std::runtime_error("Classifier: non-finite activation in " + where);
    }
  }
}

Val Classifier::ApplyConvUnit(Tape& tape, const ConvUnit& u, Val x, bool train, bool relu,
                              const std::string& where) {
  Val w = tape.Bind(const_cast<Param&>(u.w), train);
  Val gamma = tape.Bind(const_cast<Param&>(u.gamma), train);
  Val beta = tape.Bind(const_cast<Param&>(u.beta), train);
  Val out = ChannelAffine(Conv2d(x, w, u.stride, 1), gamma, beta);
  if (relu) out = Relu(out);
  if (cfg_.check_activations) CheckFinite(out.value(), where);
  return out;
}

Val Classifier::RunTrunk(Tape& tape, Val x, bool train) {
  Val h = ApplyConvUnit(tape, stem_, x, train, true, "stem");
  for (size_t g = 0; g < groups_.size(); ++g) {
    for (size_t b = 0; b < groups_[g].size(); ++b) {
      const ResBlock& blk = groups_[g][b];
      const std::string base = "g" + std::to_string(g) + ".b" + std::to_string(b);
      Val main = ApplyConvUnit(tape, blk.conv1, h, train, true, base + ".conv1");
      main = ApplyConvUnit(tape, blk.conv2, main, train, false, base + ".conv2");
      Val skip = h;
      if (blk.proj) {
        Val pw = tape.Bind(const_cast<Param&>(*blk.proj), train);
        skip = Conv2d(h, pw, blk.conv1.stride, 0);
      }
      h = Relu(Add(main, skip));
      if (cfg_.check_activations) CheckFinite(h.value(), base);
    }
  }
  Val pooled = GlobalAvgPool(h);
  Val wd = tape.Bind(head_w_, train);
  Val bd = tape.Bind(head_b_, train);
  Val logits = Dense(pooled, wd, bd);
  CheckFinite(logits.value(), "logits");
  return logits;
}

Val Classifier::ForwardPixels(Tape& tape, Val x, bool train) {
  if (cfg_.input_mode != InputMode::kPixel) {
    throw std::invalid_argument("Classifier: ForwardPixels called in dct mode");
  }
  const Tensor& v = x.value();
  if (v.rank() != 4 || v.dim(1) != 3) {
    throw std::invalid_argument("Classifier: pixel input must be [N,3,H,W], got " + v.ShapeStr());
  }
  return RunTrunk(tape, x, train);
}

Val Classifier::ForwardCoeffs(Tape& tape, const std::array<Val, 3>& maps, bool train) {
  if (cfg_.input_mode != InputMode::kDct) {
    throw std::invalid_argument("Classifier: ForwardCoeffs called in pixel mode");
  }
  const Tensor& yv = maps[0].value();
  if (yv.rank() != 4 || yv.dim(1) != 64) {
    throw std::invalid_argument("Classifier: coefficient map must be [N,64,h,w], got " +
                                yv.ShapeStr());
  }
  const int rows = yv.dim(2), cols = yv.dim(3);
  // Quantized DCT coefficients reach +-1024; bring them to unit scale.
  Val y = MulScalar(maps[0], 1.0 / 64.0);
  Val cb = MulScalar(maps[1], 1.0 / 64.0);
  Val cr = MulScalar(maps[2], 1.0 / 64.0);
  Val wcb = tape.Bind(fe_cb_w_, train);
  Val wcr = tape.Bind(fe_cr_w_, train);
  Val up_cb = Relu(Conv2dTranspose(cb, wcb, 2, 1, rows, cols));
  Val up_cr = Relu(Conv2dTranspose(cr, wcr, 2, 1, rows, cols));
  Val x = Concat({y, up_cb, up_cr}, 1);
  return RunTrunk(tape, x, train);
}

double TopkAccuracy(const Tensor& logits, const std::vector<int>& labels, int k) {
  if (logits.rank() != 2) throw std::invalid_argument("TopkAccuracy: logits must be [N,C]");
  const int n = logits.dim(0), c = logits.dim(1);
  if (k < 1 || k > c) throw std::invalid_argument("TopkAccuracy: k out of range");
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("TopkAccuracy: label count mismatch");
  }
  if (n == 0) return 0.0;
  int correct = 0;
  for (int r = 0; r < n; ++r) {
    const int label = labels[static_cast<size_t>(r)];
    if (label < 0 || label >= c) throw std::invalid_argument("TopkAccuracy: label out of range");
    const double* row = logits.data() + static_cast<int64_t>(r) * c;
    const double lv = row[label];
    int better = 0;
    for (int j = 0; j < c; ++j) {
      if (row[j] > lv || (row[j] == lv && j < label)) ++better;
    }
    if (better < k) ++correct;
  }
  return static_cast<double>(correct) / n;
}

}  // namespace qtune
