// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_CLASSIFIER_H_
#define QTUNE_CLASSIFIER_H_

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qtune/ops.h"
#include "qtune/tape.h"

namespace qtune {

enum class InputMode { kPixel, kDct };

struct ClassifierConfig {
  InputMode input_mode = InputMode::kPixel;
  int num_classes = 10;
  int width_multiplier = 1;   // k: group widths 16k, 32k, 64k
  int blocks_per_group = 1;   // residual blocks per group
  uint64_t seed = 0;
  int frontend_channels = 64; // transposed-conv width for the DCT front-end
  bool check_activations = false;

  void Validate() const;
};

// Residual CNN trunk with per-channel scale/shift in place of batch norm.
// Pixel mode consumes [N,3,H,W]; DCT mode consumes quantized coefficient maps
// {Y:[N,64,by,bx], Cb:[N,64,by/2,bx/2], Cr: same as Cb} through two stride-2
// transposed convolutions and channel concatenation.
class Classifier {
 public:
  explicit Classifier(const ClassifierConfig& cfg);

  Val ForwardPixels(Tape& tape, Val x, bool train);
  Val ForwardCoeffs(Tape& tape, const std::array<Val, 3>& maps, bool train);

  std::vector<Param*> Params();
  int64_t ParamCount() const;
  const ClassifierConfig& config() const { return cfg_; }

 private:
  struct ConvUnit {
    Param w, gamma, beta;
    int stride = 1;
  };
  struct ResBlock {
    ConvUnit conv1, conv2;
    std::optional<Param> proj;  // 1x1 shortcut when shape changes
  };

  Val RunTrunk(Tape& tape, Val x, bool train);
  Val ApplyConvUnit(Tape& tape, const ConvUnit& u, Val x, bool train, bool relu,
                    const std::string& where);
  void CheckFinite(const Tensor& t, const std::string& where) const;

  ClassifierConfig cfg_;
  ConvUnit stem_;
  std::vector<std::vector<ResBlock>> groups_;
  Param head_w_, head_b_;
  // DCT front-end.
  Param fe_cb_w_, fe_cr_w_;
  std::vector<Param*> params_;
};

// Fraction of rows whose label ranks among the k largest logits; ties broken
// toward the lower class index.
double TopkAccuracy(const Tensor& logits, const std::vector<int>& labels, int k);

}  // namespace qtune

#endif  // QTUNE_CLASSIFIER_H_
