// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "qtune/dataset.h"
#include "qtune/entropy.h"
#include "qtune/rate.h"
#include "qtune/rng.h"

using namespace qtune;

namespace {

// Random quantized channel with JPEG-ranged coefficients.
QuantizedChannel RandomChannel(Rng& rng, int rows, int cols, double density, int max_mag) {
  QuantizedChannel ch;
  ch.channel = Channel::kY;
  ch.rows = rows;
  ch.cols = cols;
  ch.blocks.resize(static_cast<size_t>(rows) * cols);
  for (auto& block : ch.blocks) {
    block.fill(0);
    for (int i = 0; i < 64; ++i) {
      if (rng.NextDouble() < density) {
        int mag = 1 + static_cast<int>(rng.NextBelow(static_cast<uint64_t>(max_mag)));
        block[static_cast<size_t>(i)] =
            static_cast<int16_t>(rng.NextDouble() < 0.5 ? -mag : mag);
      }
    }
  }
  return ch;
}

double EntropyBitsPerSymbol(const std::array<uint64_t, kAlphabetSize>& freq) {
  uint64_t total = 0;
  for (uint64_t f : freq) total += f;
  double h = 0.0;
  for (uint64_t f : freq) {
    if (f == 0) continue;
    const double p = static_cast<double>(f) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

TEST_CASE("zigzag order anchors and bijection") {
  const auto& z = ZigzagOrder();
  CHECK(z[0] == 0);   // (0,0)
  CHECK(z[1] == 1);   // (0,1)
  CHECK(z[2] == 8);   // (1,0)
  CHECK(z[63] == 63); // (7,7)
  std::set<int> seen(z.begin(), z.end());
  CHECK(seen.size() == 64);

  Rng rng(50);
  std::array<int16_t, 64> block;
  for (auto& v : block) v = static_cast<int16_t>(rng.NextBelow(2000)) - 1000;
  CHECK(ZigzagUnscan(ZigzagScan(block)) == block);

  std::array<int16_t, 64> zero{};
  CHECK(ZigzagScan(zero) == zero);
}

TEST_CASE("dc differential examples") {
  CHECK(DcDifferential({5, 5, 5}) == std::vector<int>{5, 0, 0});
  CHECK(DcDifferential({7}) == std::vector<int>{7});
  CHECK(DcDifferential({3, -2}) == std::vector<int>{3, -5});
}

TEST_CASE("size categories and amplitude bits") {
  CHECK(SizeCategory(0) == 0);
  CHECK(SizeCategory(-1) == 1);
  CHECK(AmplitudeEncode(-1, 1) == 0);
  CHECK(SizeCategory(5) == 3);
  CHECK(AmplitudeEncode(5, 3) == 0b101);
  CHECK(SizeCategory(2047) == 11);
  CHECK(SizeCategory(-2047) == 11);

  bool clamped = false;
  CHECK(SizeCategory(2048, &clamped) == 11);
  CHECK(clamped);

  // Amplitude coding round-trips across categories.
  for (int v : {-2047, -1024, -513, -5, -1, 1, 2, 33, 1023, 2047}) {
    const int size = SizeCategory(v);
    CHECK(AmplitudeDecode(AmplitudeEncode(v, size), size) == v);
  }
}

TEST_CASE("ac run-length examples") {
  int16_t ac[63] = {0};
  auto eob_only = AcRunLengthEncode(ac);
  REQUIRE(eob_only.size() == 1);
  CHECK(eob_only[0].rs == kEob);

  ac[0] = 7;
  auto lead = AcRunLengthEncode(ac);
  REQUIRE(lead.size() == 2);
  CHECK(lead[0].rs == 0x03);  // run 0, size 3
  CHECK(lead[0].value == 7);
  CHECK(lead[1].rs == kEob);

  int16_t ac2[63] = {0};
  ac2[16] = 1;  // 16 zeros then 1
  auto zrl = AcRunLengthEncode(ac2);
  REQUIRE(zrl.size() == 3);
  CHECK(zrl[0].rs == kZrl);
  CHECK(zrl[1].rs == 0x01);
  CHECK(zrl[1].value == 1);
  CHECK(zrl[2].rs == kEob);

  // decode(encode(x)) == x on random vectors.
  Rng rng(51);
  for (int trial = 0; trial < 200; ++trial) {
    int16_t v[63] = {0};
    for (int i = 0; i < 63; ++i) {
      if (rng.NextDouble() < 0.15) {
        v[i] = static_cast<int16_t>(static_cast<int>(rng.NextBelow(2046)) - 1023);
        if (v[i] == 0) v[i] = 1;
      }
    }
    auto symbols = AcRunLengthEncode(v);
    int16_t back[63];
    AcRunLengthDecode(symbols, back, trial);
    for (int i = 0; i < 63; ++i) CHECK(back[i] == v[i]);
  }
}

TEST_CASE("ac run-length decode errors name the block") {
  std::vector<AcSymbol> bad{{kZrl, 0}, {kZrl, 0}, {kZrl, 0}, {kZrl, 0}, {0x01, 1}};
  int16_t out[63];
  CHECK_THROWS_WITH_AS(AcRunLengthDecode(bad, out, 17), doctest::Contains("block 17"),
                       std::runtime_error);
}

TEST_CASE("huffman: small alphabet optimal lengths") {
  std::array<uint64_t, kAlphabetSize> freq{};
  freq[0] = 5;
  freq[1] = 2;
  freq[2] = 1;
  HuffmanTable t = HuffmanTable::FromFrequencies(freq);
  CHECK(t.length[0] == 1);
  CHECK(t.length[1] == 2);
  CHECK(t.length[2] == 2);
  CHECK(t.KraftSum() == doctest::Approx(1.0));
  CHECK(t.IsPrefixFree());
}

TEST_CASE("huffman: lone symbol gets a one-bit code") {
  std::array<uint64_t, kAlphabetSize> freq{};
  freq[42] = 9;
  HuffmanTable t = HuffmanTable::FromFrequencies(freq);
  CHECK(t.length[42] == 1);
  CHECK(t.KraftSum() == doctest::Approx(0.5));
}

TEST_CASE("huffman: average length within one bit of entropy") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<uint64_t, kAlphabetSize> freq{};
    const int n = 8 + static_cast<int>(rng.NextBelow(48));
    for (int s = 0; s < n; ++s) {
      freq[static_cast<size_t>(s)] = 1 + rng.NextBelow(10000);
    }
    HuffmanTable t = HuffmanTable::FromFrequencies(freq);
    CHECK(t.IsPrefixFree());
    CHECK(t.KraftSum() <= 1.0 + 1e-12);
    uint64_t total = 0;
    double bits = 0.0;
    for (int s = 0; s < n; ++s) {
      total += freq[static_cast<size_t>(s)];
      bits += static_cast<double>(freq[static_cast<size_t>(s)]) * t.length[static_cast<size_t>(s)];
    }
    const double avg = bits / static_cast<double>(total);
    const double h = EntropyBitsPerSymbol(freq);
    CHECK(avg >= h - 1e-9);
    CHECK(avg < h + 1.0);
  }
}

TEST_CASE("huffman: deep skewed distribution respects the 16-bit cap") {
  std::array<uint64_t, kAlphabetSize> freq{};
  uint64_t f = 1;
  for (int s = 0; s < 40; ++s) {
    freq[static_cast<size_t>(s)] = f;
    f = f < (1ull << 50) ? f * 2 : f;
  }
  HuffmanTable t = HuffmanTable::FromFrequencies(freq);
  for (int s = 0; s < kAlphabetSize; ++s) {
    CHECK(t.length[static_cast<size_t>(s)] <= kMaxCodeLength);
  }
  CHECK(t.IsPrefixFree());
  CHECK(t.KraftSum() <= 1.0 + 1e-12);
}

TEST_CASE("channel symbols round-trip through the bit stream") {
  Rng rng(53);
  // Fit tables on one sample, code a different sample so escapes occur.
  std::vector<QuantizedImage> fit_sample;
  for (int i = 0; i < 6; ++i) {
    QuantizedImage qi;
    qi.y = RandomChannel(rng, 2, 2, 0.1, 40);
    qi.cb = RandomChannel(rng, 1, 1, 0.08, 20);
    qi.cr = RandomChannel(rng, 1, 1, 0.08, 20);
    fit_sample.push_back(qi);
  }
  std::vector<const QuantizedImage*> ptrs;
  for (const auto& q : fit_sample) ptrs.push_back(&q);
  HuffmanCodec codec = CodecFromQuantized(ptrs);

  int total_escapes = 0;
  for (int trial = 0; trial < 50; ++trial) {
    QuantizedChannel ch = RandomChannel(rng, 2, 3, 0.2, 1023);
    ChannelSymbols symbols = BuildChannelSymbols(ch);

    BitWriter writer;
    EncodeStats stats;
    EncodeChannel(symbols, codec.dc_luma, codec.ac_luma, writer, stats);
    total_escapes += static_cast<int>(stats.escapes);
    std::vector<uint8_t> bytes = writer.Finish();

    BitReader reader(bytes);
    ChannelSymbols decoded =
        DecodeChannel(reader, codec.dc_luma, codec.ac_luma, static_cast<int>(symbols.size()));
    REQUIRE(decoded.size() == symbols.size());
    QuantizedChannel back = SymbolsToChannel(decoded, ch.channel, ch.rows, ch.cols);
    for (size_t b = 0; b < ch.blocks.size(); ++b) {
      CHECK(back.blocks[b] == ch.blocks[b]);
    }
  }
  CHECK(total_escapes > 0);  // the escape path was actually exercised
}

TEST_CASE("default JPEG tables are prefix-free with Kraft <= 1") {
  HuffmanCodec codec = HuffmanCodec::JpegDefault();
  for (const HuffmanTable* t :
       {&codec.dc_luma, &codec.dc_chroma, &codec.ac_luma, &codec.ac_chroma}) {
    CHECK(t->IsPrefixFree());
    CHECK(t->KraftSum() <= 1.0 + 1e-12);
  }
}

TEST_CASE("fitted tables never lose to default tables on the fitting corpus") {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 4;
  spec.train_count = 40;
  spec.val_count = 1;
  spec.seed = 99;
  Dataset ds = IngestDataset(spec);

  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(50.0);
  std::vector<const ImageRGB*> corpus;
  for (const auto& im : ds.train_images) corpus.push_back(&im);

  HuffmanCodec fitted = BuildHuffmanTables(corpus, ct, kernels, corpus.size(), 7);
  RateReport fitted_rate = MeasureRate(corpus, ct, kernels, fitted);
  RateReport default_rate = MeasureRate(corpus, ct, kernels, HuffmanCodec::JpegDefault());
  CHECK(fitted_rate.TotalBits() <= default_rate.TotalBits());
  CHECK(fitted_rate.escapes == 0);
}

TEST_CASE("rate: all-zero kernels cost exactly DC0 + EOB per block") {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 2;
  spec.train_count = 6;
  spec.val_count = 1;
  spec.seed = 5;
  Dataset ds = IngestDataset(spec);

  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::Ones();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 64; ++j) kernels.table(i).value[j] = 0.0;
  }
  std::vector<const ImageRGB*> corpus;
  for (const auto& im : ds.train_images) corpus.push_back(&im);
  HuffmanCodec codec = BuildHuffmanTables(corpus, ct, kernels, corpus.size(), 1);
  RateReport report = MeasureRate(corpus, ct, kernels, codec);

  // 32x32 images: 16 luma + 4+4 chroma blocks.
  const int64_t y_cost = codec.dc_luma.length[0] + codec.ac_luma.length[kEob];
  const int64_t c_cost = codec.dc_chroma.length[0] + codec.ac_chroma.length[kEob];
  for (const auto& p : report.images) {
    CHECK(p.bits_y == 16 * y_cost);
    CHECK(p.bits_cb == 4 * c_cost);
    CHECK(p.bits_cr == 4 * c_cost);
  }
}

TEST_CASE("rate: duplicating the corpus leaves mean KB unchanged") {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 3;
  spec.train_count = 10;
  spec.val_count = 1;
  spec.seed = 6;
  Dataset ds = IngestDataset(spec);
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(75.0);
  std::vector<const ImageRGB*> corpus;
  for (const auto& im : ds.train_images) corpus.push_back(&im);
  HuffmanCodec codec = BuildHuffmanTables(corpus, ct, kernels, corpus.size(), 2);
  RateReport once = MeasureRate(corpus, ct, kernels, codec);

  std::vector<const ImageRGB*> doubled = corpus;
  doubled.insert(doubled.end(), corpus.begin(), corpus.end());
  RateReport twice = MeasureRate(doubled, ct, kernels, codec);
  CHECK(twice.mean_kb == doctest::Approx(once.mean_kb).epsilon(1e-12));
}

TEST_CASE("rate: measurement is deterministic") {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 3;
  spec.train_count = 8;
  spec.val_count = 1;
  spec.seed = 61;
  Dataset ds = IngestDataset(spec);
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels kernels = CompressionKernels::StandardQuality(60.0);
  std::vector<const ImageRGB*> corpus;
  for (const auto& im : ds.train_images) corpus.push_back(&im);
  HuffmanCodec codec = BuildHuffmanTables(corpus, ct, kernels, corpus.size(), 3);
  RateReport a = MeasureRate(corpus, ct, kernels, codec);
  RateReport b = MeasureRate(corpus, ct, kernels, codec);
  CHECK(a.TotalBits() == b.TotalBits());
  for (size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i].total() == b.images[i].total());
  }
}

TEST_CASE("rate: empty corpus rejected") {
  std::vector<const QuantizedImage*> empty;
  CHECK_THROWS_AS(MeasureRateQuantized(empty, HuffmanCodec::JpegDefault()),
                  std::invalid_argument);
}

TEST_CASE("qtable export rules") {
  CompressionKernels k = CompressionKernels::Ones();
  k.y.value[0] = 0.5;
  k.y.value[1] = 1.0;
  k.y.value[2] = 0.0;
  k.y.value[3] = 1.0 / 300.0;  // below 1/255
  QTable q = QTableFromKernel(k.y.value);
  CHECK(q[0] == 2);
  CHECK(q[1] == 1);
  CHECK(q[2] == 255);
  CHECK(q[3] == 255);
}

TEST_CASE("qtable json round trip") {
  CompressionKernels k = CompressionKernels::StandardQuality(50.0);
  QTableExportDoc doc = MakeQTableExport(k, 0.001, 1.0, 10.0, 1234);
  const std::string path = "/tmp/qtune_test_qtables.json";
  WriteQTableJson(path, doc);
  QTableExportDoc loaded = LoadQTableJson(path);
  CHECK(loaded.y == doc.y);
  CHECK(loaded.cb == doc.cb);
  CHECK(loaded.cr == doc.cr);
  CHECK(loaded.lambda == doc.lambda);
  CHECK(loaded.seed == doc.seed);
  for (int i = 0; i < 64; ++i) {
    CHECK(loaded.kernel_y[i] == doc.kernel_y[i]);
  }
  CompressionKernels back = KernelsFromExport(loaded);
  for (int i = 0; i < 64; ++i) {
    CHECK(back.y.value[i] == doctest::Approx(1.0 / doc.y[static_cast<size_t>(i)]));
  }
}

TEST_CASE("per-coefficient size categories non-increasing under kernel shrink") {
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.classes = 4;
  spec.train_count = 12;
  spec.val_count = 1;
  spec.seed = 77;
  Dataset ds = IngestDataset(spec);
  ColorTransform ct = ColorTransform::Bt601();
  CompressionKernels base = CompressionKernels::StandardQuality(50.0);
  std::vector<const ImageRGB*> corpus;
  for (const auto& im : ds.train_images) corpus.push_back(&im);
  std::vector<QuantizedImage> full = QuantizeImages(corpus, ct, base);

  for (double alpha : {0.75, 0.5, 0.25}) {
    CompressionKernels shrunk = CompressionKernels::Ones();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 64; ++j) shrunk.table(i).value[j] = alpha * base.table(i).value[j];
    }
    std::vector<QuantizedImage> small = QuantizeImages(corpus, ct, shrunk);
    for (size_t im = 0; im < full.size(); ++im) {
      for (int c = 0; c < 3; ++c) {
        const auto& fb = full[im].channel(c).blocks;
        const auto& sb = small[im].channel(c).blocks;
        for (size_t bi = 0; bi < fb.size(); ++bi) {
          for (int j = 0; j < 64; ++j) {
            CHECK(SizeCategory(sb[bi][static_cast<size_t>(j)]) <=
                  SizeCategory(fb[bi][static_cast<size_t>(j)]));
          }
        }
      }
    }
  }
}
