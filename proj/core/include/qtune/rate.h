// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_RATE_H_
#define QTUNE_RATE_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qtune/entropy.h"
#include "qtune/jpeg_pipeline.h"

namespace qtune {

inline constexpr double kBitsPerKb = 8192.0;  // 1 KB = 1024 bytes

// Payload-size report for a corpus: code + amplitude bits only, no headers
// or table-definition segments.
struct RateReport {
  struct PerImage {
    int64_t bits_y = 0, bits_cb = 0, bits_cr = 0;
    int64_t total() const { return bits_y + bits_cb + bits_cr; }
  };
  std::vector<PerImage> images;
  double mean_kb = 0.0;
  double median_kb = 0.0;
  std::array<int64_t, 3> channel_bits{};      // Y, Cb, Cr totals
  std::array<int64_t, 64> frequency_bits{};   // attributed per zigzag position
  int64_t overhead_bits = 0;                  // EOB/ZRL codes
  int64_t escapes = 0;
  std::vector<std::string> warnings;

  int64_t TotalBits() const;
  void Finalize();
};

// Forward quantization only (pad + encode, no reconstruction). Batches
// images of equal dimensions internally.
QuantizedImage QuantizeImage(const ImageRGB& img, ColorTransform& ct,
                             CompressionKernels& kernels);
std::vector<QuantizedImage> QuantizeImages(const std::vector<const ImageRGB*>& images,
                                           ColorTransform& ct, CompressionKernels& kernels);

// Canonical tables fitted to symbol frequencies of the given streams.
HuffmanCodec CodecFromQuantized(const std::vector<const QuantizedImage*>& sample);

// Gathers frequencies from a corpus sample: the whole corpus when
// sample_size >= corpus size, otherwise a seeded random subset of that size.
HuffmanCodec BuildHuffmanTables(const std::vector<const ImageRGB*>& corpus, ColorTransform& ct,
                                CompressionKernels& kernels, size_t sample_size, uint64_t seed);

RateReport MeasureRateQuantized(const std::vector<const QuantizedImage*>& images,
                                const HuffmanCodec& codec);
RateReport MeasureRate(const std::vector<const ImageRGB*>& corpus, ColorTransform& ct,
                       CompressionKernels& kernels, const HuffmanCodec& codec);

// CSV with columns image_id,bits_y,bits_cb,bits_cr,bits_total.
void WriteRateCsv(const std::string& path, const RateReport& report,
                  const std::vector<std::string>& image_ids);

// --- Q-table export -------------------------------------------------------------

struct QTableExportDoc {
  QTable y{}, cb{}, cr{};
  Tensor kernel_y, kernel_cb, kernel_cr;
  double lambda = 0.0, lambda1 = 0.0, c = 0.0;
  uint64_t seed = 0;
};

QTableExportDoc MakeQTableExport(const CompressionKernels& kernels, double lambda,
                                 double lambda1, double c, uint64_t seed);
std::string QTableExportToJson(const QTableExportDoc& doc);
void WriteQTableJson(const std::string& path, const QTableExportDoc& doc);
QTableExportDoc LoadQTableJson(const std::string& path);
// Deployment semantics: kernels reconstructed from the integer tables (1/Q).
CompressionKernels KernelsFromExport(const QTableExportDoc& doc);

}  // namespace qtune

#endif  // QTUNE_RATE_H_
