// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_DATASET_H_
#define QTUNE_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "qtune/image.h"

namespace qtune {

enum class DatasetKind { kCifarBinary, kImageFolder, kSynthetic };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSynthetic;
  std::string path;  // cifar: .bin file or directory; folder: class-dir root
  int classes = 10;

  // Synthetic generator.
  int train_count = 1000;
  int val_count = 200;
  int height = 32;
  int width = 32;
  uint64_t seed = 0;

  // CIFAR records: label_bytes header bytes per record, the last one is the
  // label (CIFAR-10 style files use 1, CIFAR-100 files carry coarse+fine = 2).
  int label_bytes = 1;

  // Optional seeded subsetting, applied after loading.
  int class_subset = 0;    // keep this many classes (0 = all), relabeled 0..n-1
  size_t train_subset = 0; // 0 = all
  size_t val_subset = 0;
  uint64_t subset_seed = 0;

  void Validate() const;
};

struct Dataset {
  std::vector<ImageRGB> train_images;
  std::vector<int> train_labels;
  std::vector<ImageRGB> val_images;
  std::vector<int> val_labels;
  int classes = 0;
};

// Decodes a dataset per the spec. Short or corrupt CIFAR records throw with
// the byte offset; undecodable images throw with the path.
Dataset IngestDataset(const DatasetSpec& spec);

// Seeded class-structured pattern: class-informative low-frequency structure
// plus classification-irrelevant high-frequency texture and pixel noise.
ImageRGB SyntheticSample(const DatasetSpec& spec, int split, int index, int label);

std::string DatasetSummary(const Dataset& ds);

}  // namespace qtune

#endif  // QTUNE_DATASET_H_
