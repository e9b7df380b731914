// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_ENTROPY_H_
#define QTUNE_ENTROPY_H_

#include <array>
#include <cstdint>
#include <vector>

#include "qtune/jpeg_pipeline.h"

namespace qtune {

// --- zigzag ------------------------------------------------------------------

// Scan position -> row-major block index, ITU-T T.81 order.
const std::array<int, 64>& ZigzagOrder();
// Row-major block index -> scan position.
const std::array<int, 64>& ZigzagInverse();

std::array<int16_t, 64> ZigzagScan(const std::array<int16_t, 64>& block);
std::array<int16_t, 64> ZigzagUnscan(const std::array<int16_t, 64>& scanned);

// --- magnitude categories and amplitude bits ----------------------------------

// 0 if v==0 else ceil(log2(|v|+1)). Values with |v| >= 2048 are clamped to
// category 11; `clamped`, when non-null, is set in that case.
int SizeCategory(int v, bool* clamped = nullptr);

// JPEG one's-complement amplitude coding of v within `size` bits.
uint16_t AmplitudeEncode(int v, int size);
int AmplitudeDecode(uint16_t bits, int size);

// DC differential chain: first value raw, then successive differences.
std::vector<int> DcDifferential(const std::vector<int>& dcs);

// --- run-length symbols --------------------------------------------------------

inline constexpr uint8_t kEob = 0x00;
inline constexpr uint8_t kZrl = 0xF0;

struct AcSymbol {
  uint8_t rs = 0;     // (run << 4) | size; kEob ends the block, kZrl = 16 zeros
  int16_t value = 0;  // nonzero coefficient (unused for EOB/ZRL)
  bool operator==(const AcSymbol&) const = default;
};

// Encodes 63 zigzag-ordered AC coefficients.
std::vector<AcSymbol> AcRunLengthEncode(const int16_t* ac63);
// Inverse; throws std::runtime_error naming `block_index` on malformed input.
void AcRunLengthDecode(const std::vector<AcSymbol>& symbols, int16_t* ac63, int block_index);

// One block's worth of entropy symbols.
struct BlockSymbols {
  int dc_category = 0;
  int dc_diff = 0;
  std::vector<AcSymbol> ac;
  bool operator==(const BlockSymbols&) const = default;
};
using ChannelSymbols = std::vector<BlockSymbols>;

// zigzag + DC DPCM + AC run-length over a quantized channel (raster order;
// the DC predictor resets per channel).
ChannelSymbols BuildChannelSymbols(const QuantizedChannel& ch, bool* clamped = nullptr);
QuantizedChannel SymbolsToChannel(const ChannelSymbols& symbols, Channel channel, int rows,
                                  int cols);

// --- canonical Huffman ---------------------------------------------------------

// Alphabet: 0..255 regular symbols plus one escape symbol that guarantees
// codability of symbols unseen when the table was built.
inline constexpr int kEscapeSymbol = 256;
inline constexpr int kAlphabetSize = 257;
inline constexpr int kMaxCodeLength = 16;
// An escaped symbol is coded as code(ESC) + 8 raw symbol bits + 16 raw value
// bits.
inline constexpr int kEscapePayloadBits = 24;

struct HuffmanTable {
  std::array<uint8_t, kAlphabetSize> length{};   // 0 = absent
  std::array<uint16_t, kAlphabetSize> code{};

  bool Has(int sym) const { return length[static_cast<size_t>(sym)] != 0; }
  double KraftSum() const;
  bool IsPrefixFree() const;

  // Canonical code from symbol frequencies: optimal lengths (ties broken by
  // symbol ordinal), limited to 16 bits by the standard adjustment
  // procedure. The escape symbol always receives a code.
  static HuffmanTable FromFrequencies(const std::array<uint64_t, kAlphabetSize>& freq);
  // From a JPEG-style (bits, values) table definition.
  static HuffmanTable FromJpegSpec(const uint8_t bits[17], const uint8_t* values, int count);
};

struct HuffmanCodec {
  HuffmanTable dc_luma, dc_chroma, ac_luma, ac_chroma;
  static HuffmanCodec JpegDefault();
  const HuffmanTable& dc(Channel c) const { return c == Channel::kY ? dc_luma : dc_chroma; }
  const HuffmanTable& ac(Channel c) const { return c == Channel::kY ? ac_luma : ac_chroma; }
};

// --- bit I/O -------------------------------------------------------------------

class BitSink {
 public:
  virtual ~BitSink() = default;
  virtual void Put(uint32_t bits, int n) = 0;
  virtual int64_t BitCount() const = 0;
};

class BitWriter : public BitSink {
 public:
  void Put(uint32_t bits, int n) override;
  int64_t BitCount() const override { return nbits_; }
  // Pads the final byte with 1-bits.
  std::vector<uint8_t> Finish();

 private:
  std::vector<uint8_t> bytes_;
  uint32_t acc_ = 0;
  int acc_bits_ = 0;
  int64_t nbits_ = 0;
};

class BitCounter : public BitSink {
 public:
  void Put(uint32_t, int n) override { nbits_ += n; }
  int64_t BitCount() const override { return nbits_; }

 private:
  int64_t nbits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}
  uint32_t Read(int n);
  int ReadBit();
  int64_t BitPos() const { return pos_; }

 private:
  const std::vector<uint8_t>& bytes_;
  int64_t pos_ = 0;
};

// --- stream coding -------------------------------------------------------------

struct EncodeStats {
  int64_t bits = 0;
  int64_t escapes = 0;
  // Optional external accumulators: bits attributed per zigzag position, and
  // EOB/ZRL bits.
  std::array<int64_t, 64>* frequency_bits = nullptr;
  int64_t* overhead_bits = nullptr;
};

// Entropy-codes one channel. When `strict`, a symbol missing from a table
// without an escape code throws; otherwise its cost is counted as
// max-length + escape payload (measurement with fixed third-party tables).
void EncodeChannel(const ChannelSymbols& symbols, const HuffmanTable& dc,
                   const HuffmanTable& ac, BitSink& sink, EncodeStats& stats,
                   bool strict = true);

// Inverse of EncodeChannel for `block_count` blocks. Throws
// std::runtime_error naming the block index and bit offset on malformed
// streams.
ChannelSymbols DecodeChannel(BitReader& reader, const HuffmanTable& dc, const HuffmanTable& ac,
                             int block_count);

}  // namespace qtune

#endif  // QTUNE_ENTROPY_H_
