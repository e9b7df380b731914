// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/rate.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "qtune/rng.h"

namespace qtune {

int64_t RateReport::TotalBits() const {
  int64_t t = 0;
  for (const PerImage& p : images) t += p.total();
  return t;
}

void RateReport::Finalize() {
  channel_bits = {0, 0, 0};
  std::vector<int64_t> totals;
  totals.reserve(images.size());
  for (const PerImage& p : images) {
    channel_bits[0] += p.bits_y;
    channel_bits[1] += p.bits_cb;
    channel_bits[2] += p.bits_cr;
    totals.push_back(p.total());
  }
  if (totals.empty()) {
    mean_kb = median_kb = 0.0;
    return;
  }
  mean_kb = static_cast<double>(TotalBits()) / static_cast<double>(totals.size()) / kBitsPerKb;
  std::sort(totals.begin(), totals.end());
  const size_t n = totals.size();
  median_kb = (n % 2 == 1 ? static_cast<double>(totals[n / 2])
                          : 0.5 * static_cast<double>(totals[n / 2 - 1] + totals[n / 2])) /
              kBitsPerKb;
}

QuantizedImage QuantizeImage(const ImageRGB& img, ColorTransform& ct,
                             CompressionKernels& kernels) {
  std::vector<const ImageRGB*> one{&img};
  return QuantizeImages(one, ct, kernels)[0];
}

std::vector<QuantizedImage> QuantizeImages(const std::vector<const ImageRGB*>& images,
                                           ColorTransform& ct, CompressionKernels& kernels) {
  std::vector<QuantizedImage> out;
  out.reserve(images.size());
  size_t i = 0;
  constexpr size_t kMaxBatch = 64;
  while (i < images.size()) {
    // Group a run of equally sized images into one batch.
    const ImageRGB first = PadToMultiple(*images[i], 16);
    std::vector<ImageRGB> padded;
    padded.push_back(first);
    size_t j = i + 1;
    while (j < images.size() && padded.size() < kMaxBatch) {
      ImageRGB p = PadToMultiple(*images[j], 16);
      if (p.height() != first.height() || p.width() != first.width()) break;
      padded.push_back(std::move(p));
      ++j;
    }
    std::vector<const ImageRGB*> ptrs;
    ptrs.reserve(padded.size());
    for (const ImageRGB& im : padded) ptrs.push_back(&im);
    Tensor r, g, b;
    ImagesToPlaneTensors(ptrs, r, g, b);

    Tape tape;
    PipelineContext ctx = BindPipeline(tape, ct, kernels, false, false);
    Val rv = tape.Leaf(std::move(r)), gv = tape.Leaf(std::move(g)), bv = tape.Leaf(std::move(b));
    EncodeResult enc = EncodePipeline(tape, rv, gv, bv, ctx);
    for (size_t k = 0; k < padded.size(); ++k) {
      out.push_back(ExtractQuantized(enc, static_cast<int>(k)));
    }
    i = j;
  }
  return out;
}

HuffmanCodec CodecFromQuantized(const std::vector<const QuantizedImage*>& sample) {
  if (sample.empty()) throw std::invalid_argument("CodecFromQuantized: empty sample");
  std::array<uint64_t, kAlphabetSize> dc_luma{}, dc_chroma{}, ac_luma{}, ac_chroma{};
  for (const QuantizedImage* qi : sample) {
    for (int c = 0; c < 3; ++c) {
      const QuantizedChannel& ch = qi->channel(c);
      auto& dcf = c == 0 ? dc_luma : dc_chroma;
      auto& acf = c == 0 ? ac_luma : ac_chroma;
      for (const BlockSymbols& bs : BuildChannelSymbols(ch)) {
        ++dcf[static_cast<size_t>(bs.dc_category)];
        for (const AcSymbol& s : bs.ac) ++acf[s.rs];
      }
    }
  }
  // The escape symbol always gets a code so unseen validation symbols stay
  // codable.
  for (auto* f : {&dc_luma, &dc_chroma, &ac_luma, &ac_chroma}) {
    if ((*f)[kEscapeSymbol] == 0) (*f)[kEscapeSymbol] = 1;
  }
  HuffmanCodec codec;
  codec.dc_luma = HuffmanTable::FromFrequencies(dc_luma);
  codec.dc_chroma = HuffmanTable::FromFrequencies(dc_chroma);
  codec.ac_luma = HuffmanTable::FromFrequencies(ac_luma);
  codec.ac_chroma = HuffmanTable::FromFrequencies(ac_chroma);
  return codec;
}

HuffmanCodec BuildHuffmanTables(const std::vector<const ImageRGB*>& corpus, ColorTransform& ct,
                                CompressionKernels& kernels, size_t sample_size, uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("BuildHuffmanTables: empty corpus");
  std::vector<const ImageRGB*> sample;
  if (sample_size >= corpus.size()) {
    sample = corpus;
  } else {
    std::vector<size_t> idx(corpus.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.Shuffle(idx);
    idx.resize(sample_size);
    std::sort(idx.begin(), idx.end());
    sample.reserve(sample_size);
    for (size_t i : idx) sample.push_back(corpus[i]);
  }
  std::vector<QuantizedImage> quantized = QuantizeImages(sample, ct, kernels);
  std::vector<const QuantizedImage*> ptrs;
  ptrs.reserve(quantized.size());
  for (const QuantizedImage& q : quantized) ptrs.push_back(&q);
  return CodecFromQuantized(ptrs);
}

RateReport MeasureRateQuantized(const std::vector<const QuantizedImage*>& images,
                                const HuffmanCodec& codec) {
  if (images.empty()) throw std::invalid_argument("MeasureRateQuantized: empty corpus");
  RateReport report;
  report.images.reserve(images.size());
  for (const QuantizedImage* qi : images) {
    RateReport::PerImage per;
    for (int c = 0; c < 3; ++c) {
      const QuantizedChannel& ch = qi->channel(c);
      bool clamped = false;
      ChannelSymbols symbols = BuildChannelSymbols(ch, &clamped);
      if (clamped) {
        report.warnings.push_back("image " + std::to_string(report.images.size()) +
                                  ": coefficient magnitude clamped to category 11");
      }
      const Channel cc = static_cast<Channel>(c);
      BitCounter counter;
      EncodeStats stats;
      stats.frequency_bits = &report.frequency_bits;
      stats.overhead_bits = &report.overhead_bits;
      EncodeChannel(symbols, codec.dc(cc), codec.ac(cc), counter, stats, /*strict=*/false);
      report.escapes += stats.escapes;
      (c == 0 ? per.bits_y : (c == 1 ? per.bits_cb : per.bits_cr)) = stats.bits;
    }
    report.images.push_back(per);
  }
  if (report.escapes > 0) {
    report.warnings.push_back(std::to_string(report.escapes) +
                              " symbols escape-coded (absent from the codec tables)");
  }
  report.Finalize();
  return report;
}

RateReport MeasureRate(const std::vector<const ImageRGB*>& corpus, ColorTransform& ct,
                       CompressionKernels& kernels, const HuffmanCodec& codec) {
  if (corpus.empty()) throw std::invalid_argument("MeasureRate: empty corpus");
  std::vector<QuantizedImage> quantized = QuantizeImages(corpus, ct, kernels);
  std::vector<const QuantizedImage*> ptrs;
  ptrs.reserve(quantized.size());
  for (const QuantizedImage& q : quantized) ptrs.push_back(&q);
  return MeasureRateQuantized(ptrs, codec);
}

void WriteRateCsv(const std::string& path, const RateReport& report,
                  const std::vector<std::string>& image_ids) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("WriteRateCsv: cannot open " + path);
  f << "image_id,bits_y,bits_cb,bits_cr,bits_total\n";
  for (size_t i = 0; i < report.images.size(); ++i) {
    const auto& p = report.images[i];
    const std::string id = i < image_ids.size() ? image_ids[i] : std::to_string(i);
    f << id << "," << p.bits_y << "," << p.bits_cb << "," << p.bits_cr << "," << p.total()
      << "\n";
  }
}

// --- export ----------------------------------------------------------------------

namespace {

nlohmann::json QTableToJson(const QTable& q) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 8; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < 8; ++c) row.push_back(q[static_cast<size_t>(r * 8 + c)]);
    rows.push_back(row);
  }
  return rows;
}

QTable QTableFromJson(const nlohmann::json& rows) {
  QTable q{};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) q[static_cast<size_t>(r * 8 + c)] = rows.at(r).at(c).get<int>();
  }
  return q;
}

nlohmann::json KernelToJson(const Tensor& k) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 8; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < 8; ++c) row.push_back(k[r * 8 + c]);
    rows.push_back(row);
  }
  return rows;
}

Tensor KernelFromJson(const nlohmann::json& rows) {
  Tensor k({8, 8});
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) k[r * 8 + c] = rows.at(r).at(c).get<double>();
  }
  return k;
}

}  // namespace

QTableExportDoc MakeQTableExport(const CompressionKernels& kernels, double lambda,
                                 double lambda1, double c, uint64_t seed) {
  QTableExportDoc doc;
  doc.y = QTableFromKernel(kernels.y.value);
  doc.cb = QTableFromKernel(kernels.cb.value);
  doc.cr = QTableFromKernel(kernels.cr.value);
  doc.kernel_y = kernels.y.value;
  doc.kernel_cb = kernels.cb.value;
  doc.kernel_cr = kernels.cr.value;
  doc.lambda = lambda;
  doc.lambda1 = lambda1;
  doc.c = c;
  doc.seed = seed;
  return doc;
}

std::string QTableExportToJson(const QTableExportDoc& doc) {
  nlohmann::json j;
  j["y_qtable"] = QTableToJson(doc.y);
  j["cb_qtable"] = QTableToJson(doc.cb);
  j["cr_qtable"] = QTableToJson(doc.cr);
  j["kernels"]["y"] = KernelToJson(doc.kernel_y);
  j["kernels"]["cb"] = KernelToJson(doc.kernel_cb);
  j["kernels"]["cr"] = KernelToJson(doc.kernel_cr);
  j["metadata"]["lambda"] = doc.lambda;
  j["metadata"]["lambda1"] = doc.lambda1;
  j["metadata"]["c"] = doc.c;
  j["metadata"]["seed"] = doc.seed;
  return j.dump(2);
}

void WriteQTableJson(const std::string& path, const QTableExportDoc& doc) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("WriteQTableJson: cannot open " + path);
  f << QTableExportToJson(doc) << "\n";
}

QTableExportDoc LoadQTableJson(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("LoadQTableJson: cannot open " + path);
  nlohmann::json j;
  f >> j;
  QTableExportDoc doc;
  doc.y = QTableFromJson(j.at("y_qtable"));
  doc.cb = QTableFromJson(j.at("cb_qtable"));
  doc.cr = QTableFromJson(j.at("cr_qtable"));
  doc.kernel_y = KernelFromJson(j.at("kernels").at("y"));
  doc.kernel_cb = KernelFromJson(j.at("kernels").at("cb"));
  doc.kernel_cr = KernelFromJson(j.at("kernels").at("cr"));
  const auto& meta = j.at("metadata");
  doc.lambda = meta.at("lambda").get<double>();
  doc.lambda1 = meta.at("lambda1").get<double>();
  doc.c = meta.at("c").get<double>();
  doc.seed = meta.at("seed").get<uint64_t>();
  return doc;
}

CompressionKernels KernelsFromExport(const QTableExportDoc& doc) {
  return CompressionKernels::FromQTables(doc.y, doc.cb, doc.cr);
}

}  // namespace qtune
