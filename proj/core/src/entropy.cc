// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/entropy.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace qtune {

// --- zigzag ------------------------------------------------------------------

const std::array<int, 64>& ZigzagOrder() {
  static const std::array<int, 64> z = {
      0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,   //
      12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,  //
      35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,  //
      58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};
  return z;
}

const std::array<int, 64>& ZigzagInverse() {
  static const std::array<int, 64> inv = [] {
    std::array<int, 64> t{};
    const auto& z = ZigzagOrder();
    for (int i = 0; i < 64; ++i) t[static_cast<size_t>(z[static_cast<size_t>(i)])] = i;
    return t;
  }();
  return inv;
}

std::array<int16_t, 64> ZigzagScan(const std::array<int16_t, 64>& block) {
  std::array<int16_t, 64> out;
  const auto& z = ZigzagOrder();
  for (int i = 0; i < 64; ++i) out[static_cast<size_t>(i)] = block[static_cast<size_t>(z[static_cast<size_t>(i)])];
  return out;
}

std::array<int16_t, 64> ZigzagUnscan(const std::array<int16_t, 64>& scanned) {
  std::array<int16_t, 64> out;
  const auto& z = ZigzagOrder();
  for (int i = 0; i < 64; ++i) out[static_cast<size_t>(z[static_cast<size_t>(i)])] = scanned[static_cast<size_t>(i)];
  return out;
}

// --- categories and amplitudes --------------------------------------------------

int SizeCategory(int v, bool* clamped) {
  int a = std::abs(v);
  if (a >= 2048) {
    if (clamped != nullptr) *clamped = true;
    a = 2047;
  }
  int cat = 0;
  while (a != 0) {
    ++cat;
    a >>= 1;
  }
  return cat;
}

uint16_t AmplitudeEncode(int v, int size) {
  if (size == 0) return 0;
  if (v >= 0) return static_cast<uint16_t>(v);
  return static_cast<uint16_t>(v + (1 << size) - 1);
}

int AmplitudeDecode(uint16_t bits, int size) {
  if (size == 0) return 0;
  if (bits < (1u << (size - 1))) {
    return static_cast<int>(bits) - (1 << size) + 1;
  }
  return static_cast<int>(bits);
}

std::vector<int> DcDifferential(const std::vector<int>& dcs) {
  std::vector<int> out(dcs.size());
  int prev = 0;
  for (size_t i = 0; i < dcs.size(); ++i) {
    out[i] = dcs[i] - prev;
    prev = dcs[i];
  }
  return out;
}

// --- run-length --------------------------------------------------------------

std::vector<AcSymbol> AcRunLengthEncode(const int16_t* ac63) {
  std::vector<AcSymbol> out;
  int last_nonzero = -1;
  for (int i = 0; i < 63; ++i) {
    if (ac63[i] != 0) last_nonzero = i;
  }
  int run = 0;
  for (int i = 0; i <= last_nonzero; ++i) {
    if (ac63[i] == 0) {
      ++run;
      continue;
    }
    while (run >= 16) {
      out.push_back({kZrl, 0});
      run -= 16;
    }
    const int size = SizeCategory(ac63[i]);
    out.push_back({static_cast<uint8_t>((run << 4) | size), ac63[i]});
    run = 0;
  }
  if (last_nonzero < 62) out.push_back({kEob, 0});
  return out;
}

void AcRunLengthDecode(const std::vector<AcSymbol>& symbols, int16_t* ac63, int block_index) {
  std::fill(ac63, ac63 + 63, static_cast<int16_t>(0));
  int pos = 0;
  auto fail = [block_index, &pos](const std::string& what) {
    throw std::runtime_error("AC decode error in block " + std::to_string(block_index) +
                             " at coefficient " + std::to_string(pos) + ": " + what);
  };
  for (size_t s = 0; s < symbols.size(); ++s) {
    const AcSymbol& sym = symbols[s];
    if (sym.rs == kEob) {
      if (s + 1 != symbols.size()) fail("EOB not final");
      return;
    }
    if (sym.rs == kZrl) {
      pos += 16;
      if (pos > 63) fail("ZRL overruns block");
      continue;
    }
    const int run = sym.rs >> 4;
    const int size = sym.rs & 0xF;
    if (size == 0) fail("zero size in (run,size)");
    pos += run;
    if (pos >= 63) fail("(run,size) overruns block");
    if (sym.value == 0) fail("zero amplitude for nonzero symbol");
    ac63[pos] = sym.value;
    ++pos;
  }
  if (pos > 63) fail("coefficients overrun block");
}

ChannelSymbols BuildChannelSymbols(const QuantizedChannel& ch, bool* clamped) {
  ChannelSymbols out;
  out.reserve(ch.blocks.size());
  int prev_dc = 0;
  for (const auto& block : ch.blocks) {
    std::array<int16_t, 64> zz = ZigzagScan(block);
    BlockSymbols bs;
    bs.dc_diff = zz[0] - prev_dc;
    prev_dc = zz[0];
    bs.dc_category = SizeCategory(bs.dc_diff, clamped);
    bs.ac = AcRunLengthEncode(zz.data() + 1);
    out.push_back(std::move(bs));
  }
  return out;
}

QuantizedChannel SymbolsToChannel(const ChannelSymbols& symbols, Channel channel, int rows,
                                  int cols) {
  if (static_cast<size_t>(rows) * cols != symbols.size()) {
    throw std::invalid_argument("SymbolsToChannel: block count mismatch");
  }
  QuantizedChannel ch;
  ch.channel = channel;
  ch.rows = rows;
  ch.cols = cols;
  ch.blocks.resize(symbols.size());
  int prev_dc = 0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    std::array<int16_t, 64> zz{};
    prev_dc += symbols[i].dc_diff;
    zz[0] = static_cast<int16_t>(prev_dc);
    AcRunLengthDecode(symbols[i].ac, zz.data() + 1, static_cast<int>(i));
    ch.blocks[i] = ZigzagUnscan(zz);
  }
  return ch;
}

// --- Huffman -----------------------------------------------------------------

double HuffmanTable::KraftSum() const {
  double s = 0.0;
  for (int i = 0; i < kAlphabetSize; ++i) {
    if (length[static_cast<size_t>(i)] > 0) s += std::ldexp(1.0, -length[static_cast<size_t>(i)]);
  }
  return s;
}

bool HuffmanTable::IsPrefixFree() const {
  // Canonical codes of different symbols must not prefix one another.
  for (int a = 0; a < kAlphabetSize; ++a) {
    const int la = length[static_cast<size_t>(a)];
    if (la == 0) continue;
    for (int b = 0; b < kAlphabetSize; ++b) {
      if (a == b) continue;
      const int lb = length[static_cast<size_t>(b)];
      if (lb == 0 || lb < la) continue;
      if ((code[static_cast<size_t>(b)] >> (lb - la)) == code[static_cast<size_t>(a)]) return false;
    }
  }
  return true;
}

namespace {

// Assigns canonical codes from lengths, ordering symbols by (length, ordinal).
void AssignCanonicalCodes(HuffmanTable& t) {
  std::vector<int> syms;
  for (int s = 0; s < kAlphabetSize; ++s) {
    if (t.length[static_cast<size_t>(s)] > 0) syms.push_back(s);
  }
  std::sort(syms.begin(), syms.end(), [&](int a, int b) {
    if (t.length[static_cast<size_t>(a)] != t.length[static_cast<size_t>(b)]) {
      return t.length[static_cast<size_t>(a)] < t.length[static_cast<size_t>(b)];
    }
    return a < b;
  });
  uint32_t code = 0;
  int cur_len = syms.empty() ? 0 : t.length[static_cast<size_t>(syms[0])];
  for (int s : syms) {
    const int l = t.length[static_cast<size_t>(s)];
    code <<= (l - cur_len);
    cur_len = l;
    t.code[static_cast<size_t>(s)] = static_cast<uint16_t>(code);
    ++code;
  }
}

}  // namespace

HuffmanTable HuffmanTable::FromFrequencies(const std::array<uint64_t, kAlphabetSize>& freq) {
  struct QNode {
    uint64_t freq;
    int tiebreak;  // smallest symbol ordinal in the subtree
    int index;     // into nodes
  };
  struct NodeCmp {
    bool operator()(const QNode& a, const QNode& b) const {
      if (a.freq != b.freq) return a.freq > b.freq;
      return a.tiebreak > b.tiebreak;
    }
  };
  struct TreeNode {
    int left = -1, right = -1, symbol = -1;
  };

  std::vector<TreeNode> nodes;
  std::priority_queue<QNode, std::vector<QNode>, NodeCmp> heap;
  int present = 0;
  for (int s = 0; s < kAlphabetSize; ++s) {
    if (freq[static_cast<size_t>(s)] == 0) continue;
    nodes.push_back({-1, -1, s});
    heap.push({freq[static_cast<size_t>(s)], s, static_cast<int>(nodes.size() - 1)});
    ++present;
  }

  HuffmanTable t;
  if (present == 0) {
    throw std::invalid_argument("HuffmanTable::FromFrequencies: empty alphabet");
  }
  if (present == 1) {
    // Zero-length codes are not allowed; a lone symbol gets one bit.
    const int s = nodes[0].symbol;
    t.length[static_cast<size_t>(s)] = 1;
    AssignCanonicalCodes(t);
    return t;
  }

  while (heap.size() > 1) {
    QNode a = heap.top();
    heap.pop();
    QNode b = heap.top();
    heap.pop();
    nodes.push_back({a.index, b.index, -1});
    heap.push({a.freq + b.freq, std::min(a.tiebreak, b.tiebreak),
               static_cast<int>(nodes.size() - 1)});
  }

  // Depth-first walk for code lengths.
  std::vector<std::pair<int, int>> stack{{heap.top().index, 0}};
  int max_len = 0;
  while (!stack.empty()) {
    auto [idx, depth] = stack.back();
    stack.pop_back();
    const TreeNode& nd = nodes[static_cast<size_t>(idx)];
    if (nd.symbol >= 0) {
      t.length[static_cast<size_t>(nd.symbol)] = static_cast<uint8_t>(depth);
      max_len = std::max(max_len, depth);
      continue;
    }
    stack.push_back({nd.left, depth + 1});
    stack.push_back({nd.right, depth + 1});
  }

  if (max_len > kMaxCodeLength) {
    // Standard JPEG length-limiting: push pairs of overlong codes up.
    std::array<int, 64> bits{};
    for (int s = 0; s < kAlphabetSize; ++s) {
      if (t.length[static_cast<size_t>(s)] > 0) ++bits[t.length[static_cast<size_t>(s)]];
    }
    for (int l = max_len; l > kMaxCodeLength; --l) {
      while (bits[static_cast<size_t>(l)] > 0) {
        int j = l - 2;
        while (bits[static_cast<size_t>(j)] == 0) --j;
        bits[static_cast<size_t>(l)] -= 2;
        bits[static_cast<size_t>(l - 1)] += 1;
        bits[static_cast<size_t>(j + 1)] += 2;
        bits[static_cast<size_t>(j)] -= 1;
      }
    }
    // Reassign lengths: symbols ordered by (old length, ordinal) receive the
    // adjusted lengths in nondecreasing order.
    std::vector<int> syms;
    for (int s = 0; s < kAlphabetSize; ++s) {
      if (t.length[static_cast<size_t>(s)] > 0) syms.push_back(s);
    }
    std::sort(syms.begin(), syms.end(), [&](int a, int b) {
      if (t.length[static_cast<size_t>(a)] != t.length[static_cast<size_t>(b)]) {
        return t.length[static_cast<size_t>(a)] < t.length[static_cast<size_t>(b)];
      }
      return a < b;
    });
    size_t k = 0;
    for (int l = 1; l <= kMaxCodeLength; ++l) {
      for (int cnt = 0; cnt < bits[static_cast<size_t>(l)]; ++cnt) {
        t.length[static_cast<size_t>(syms[k++])] = static_cast<uint8_t>(l);
      }
    }
  }

  AssignCanonicalCodes(t);
  return t;
}

HuffmanTable HuffmanTable::FromJpegSpec(const uint8_t bits[17], const uint8_t* values,
                                        int count) {
  HuffmanTable t;
  int k = 0;
  for (int l = 1; l <= 16; ++l) {
    for (int i = 0; i < bits[l]; ++i) {
      if (k >= count) throw std::invalid_argument("HuffmanTable::FromJpegSpec: too few values");
      t.length[values[k]] = static_cast<uint8_t>(l);
      ++k;
    }
  }
  AssignCanonicalCodes(t);
  return t;
}

namespace {

// ITU-T T.81 Annex K.3 typical tables.
const uint8_t kDcLumaBits[17] = {0, 0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
const uint8_t kDcLumaVals[12] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
const uint8_t kDcChromaBits[17] = {0, 0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
const uint8_t kDcChromaVals[12] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
const uint8_t kAcLumaBits[17] = {0, 0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d};
const uint8_t kAcLumaVals[162] = {
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61,
    0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52,
    0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25,
    0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45,
    0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64,
    0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83,
    0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99,
    0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6,
    0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3,
    0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8,
    0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa};
const uint8_t kAcChromaBits[17] = {0, 0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77};
const uint8_t kAcChromaVals[162] = {
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61,
    0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33,
    0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18,
    0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44,
    0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63,
    0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a,
    0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97,
    0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4,
    0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca,
    0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7,
    0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa};

}  // namespace

HuffmanCodec HuffmanCodec::JpegDefault() {
  HuffmanCodec c;
  c.dc_luma = HuffmanTable::FromJpegSpec(kDcLumaBits, kDcLumaVals, 12);
  c.dc_chroma = HuffmanTable::FromJpegSpec(kDcChromaBits, kDcChromaVals, 12);
  c.ac_luma = HuffmanTable::FromJpegSpec(kAcLumaBits, kAcLumaVals, 162);
  c.ac_chroma = HuffmanTable::FromJpegSpec(kAcChromaBits, kAcChromaVals, 162);
  return c;
}

// --- bit I/O -------------------------------------------------------------------

void BitWriter::Put(uint32_t bits, int n) {
  acc_ = (acc_ << n) | (bits & ((n >= 32 ? 0 : (1u << n)) - 1u));
  acc_bits_ += n;
  nbits_ += n;
  while (acc_bits_ >= 8) {
    bytes_.push_back(static_cast<uint8_t>(acc_ >> (acc_bits_ - 8)));
    acc_bits_ -= 8;
  }
}

std::vector<uint8_t> BitWriter::Finish() {
  if (acc_bits_ > 0) {
    const int pad = 8 - acc_bits_;
    acc_ = (acc_ << pad) | ((1u << pad) - 1u);
    bytes_.push_back(static_cast<uint8_t>(acc_ & 0xFF));
    acc_bits_ = 0;
  }
  return std::move(bytes_);
}

uint32_t BitReader::Read(int n) {
  uint32_t v = 0;
  for (int i = 0; i < n; ++i) v = (v << 1) | static_cast<uint32_t>(ReadBit());
  return v;
}

int BitReader::ReadBit() {
  const int64_t byte = pos_ >> 3;
  if (byte >= static_cast<int64_t>(bytes_.size())) {
    throw std::runtime_error("BitReader: read past end at bit " + std::to_string(pos_));
  }
  const int bit = 7 - static_cast<int>(pos_ & 7);
  ++pos_;
  return (bytes_[static_cast<size_t>(byte)] >> bit) & 1;
}

// --- stream coding -------------------------------------------------------------

namespace {

// Emits `sym` (with `raw_value` as its escape payload) through `sink`.
// Returns emitted bit count.
int PutSymbol(const HuffmanTable& table, int sym, int raw_value, BitSink& sink,
              EncodeStats& stats, bool strict) {
  if (table.Has(sym)) {
    sink.Put(table.code[static_cast<size_t>(sym)], table.length[static_cast<size_t>(sym)]);
    return table.length[static_cast<size_t>(sym)];
  }
  ++stats.escapes;
  if (table.Has(kEscapeSymbol)) {
    sink.Put(table.code[kEscapeSymbol], table.length[kEscapeSymbol]);
    sink.Put(static_cast<uint32_t>(sym & 0xFF), 8);
    sink.Put(static_cast<uint32_t>(static_cast<uint16_t>(raw_value)), 16);
    return table.length[kEscapeSymbol] + kEscapePayloadBits;
  }
  if (strict) {
    throw std::runtime_error("EncodeChannel: symbol " + std::to_string(sym) +
                             " has no code and the table has no escape");
  }
  // Fixed-table measurement fallback: max code length plus the raw payload.
  sink.Put(0, kMaxCodeLength + kEscapePayloadBits);
  return kMaxCodeLength + kEscapePayloadBits;
}

}  // namespace

void EncodeChannel(const ChannelSymbols& symbols, const HuffmanTable& dc,
                   const HuffmanTable& ac, BitSink& sink, EncodeStats& stats, bool strict) {
  const int64_t start = sink.BitCount();
  for (const BlockSymbols& bs : symbols) {
    int bits = PutSymbol(dc, bs.dc_category, bs.dc_diff, sink, stats, strict);
    if (dc.Has(bs.dc_category)) {
      sink.Put(AmplitudeEncode(bs.dc_diff, bs.dc_category), bs.dc_category);
      bits += bs.dc_category;
    }
    if (stats.frequency_bits != nullptr) (*stats.frequency_bits)[0] += bits;

    int pos = 1;
    for (const AcSymbol& sym : bs.ac) {
      if (sym.rs == kEob || sym.rs == kZrl) {
        const int b = PutSymbol(ac, sym.rs, 0, sink, stats, strict);
        if (stats.overhead_bits != nullptr) *stats.overhead_bits += b;
        if (sym.rs == kZrl) pos += 16;
        continue;
      }
      const int run = sym.rs >> 4;
      const int size = sym.rs & 0xF;
      pos += run;
      int b = PutSymbol(ac, sym.rs, sym.value, sink, stats, strict);
      if (ac.Has(sym.rs)) {
        sink.Put(AmplitudeEncode(sym.value, size), size);
        b += size;
      }
      if (stats.frequency_bits != nullptr && pos < 64) (*stats.frequency_bits)[static_cast<size_t>(pos)] += b;
      ++pos;
    }
  }
  stats.bits += sink.BitCount() - start;
}

namespace {

// Canonical first-code decoder: O(code length) per symbol.
struct CanonicalDecoder {
  std::array<uint32_t, kMaxCodeLength + 1> first_code{};
  std::array<int, kMaxCodeLength + 1> count{};
  std::array<int, kMaxCodeLength + 1> offset{};
  std::vector<int> symbols;  // sorted by (length, ordinal)

  explicit CanonicalDecoder(const HuffmanTable& t) {
    for (int s = 0; s < kAlphabetSize; ++s) {
      if (t.length[static_cast<size_t>(s)] > 0) ++count[t.length[static_cast<size_t>(s)]];
    }
    uint32_t code = 0;
    int off = 0;
    for (int l = 1; l <= kMaxCodeLength; ++l) {
      code <<= 1;
      first_code[static_cast<size_t>(l)] = code;
      offset[static_cast<size_t>(l)] = off;
      code += static_cast<uint32_t>(count[static_cast<size_t>(l)]);
      off += count[static_cast<size_t>(l)];
    }
    symbols.reserve(static_cast<size_t>(off));
    for (int l = 1; l <= kMaxCodeLength; ++l) {
      for (int s = 0; s < kAlphabetSize; ++s) {
        if (t.length[static_cast<size_t>(s)] == l) symbols.push_back(s);
      }
    }
  }

  int Decode(BitReader& reader, int block_index) const {
    uint32_t code = 0;
    for (int len = 1; len <= kMaxCodeLength; ++len) {
      code = (code << 1) | static_cast<uint32_t>(reader.ReadBit());
      const uint32_t base = first_code[static_cast<size_t>(len)];
      if (count[static_cast<size_t>(len)] > 0 && code >= base &&
          code < base + static_cast<uint32_t>(count[static_cast<size_t>(len)])) {
        return symbols[static_cast<size_t>(offset[static_cast<size_t>(len)] +
                                           static_cast<int>(code - base))];
      }
    }
    throw std::runtime_error("DecodeChannel: invalid code in block " +
                             std::to_string(block_index) + " at bit " +
                             std::to_string(reader.BitPos()));
  }
};

}  // namespace

ChannelSymbols DecodeChannel(BitReader& reader, const HuffmanTable& dc, const HuffmanTable& ac,
                             int block_count) {
  const CanonicalDecoder dc_dec(dc), ac_dec(ac);
  ChannelSymbols out;
  out.reserve(static_cast<size_t>(block_count));
  for (int b = 0; b < block_count; ++b) {
    BlockSymbols bs;
    int sym = dc_dec.Decode(reader, b);
    if (sym == kEscapeSymbol) {
      const int raw_sym = static_cast<int>(reader.Read(8));
      const int16_t value = static_cast<int16_t>(reader.Read(16));
      bs.dc_category = raw_sym;
      bs.dc_diff = value;
    } else {
      bs.dc_category = sym;
      bs.dc_diff = AmplitudeDecode(static_cast<uint16_t>(reader.Read(sym)), sym);
    }
    int pos = 1;
    while (pos < 64) {
      int s = ac_dec.Decode(reader, b);
      AcSymbol acs;
      if (s == kEscapeSymbol) {
        acs.rs = static_cast<uint8_t>(reader.Read(8));
        acs.value = static_cast<int16_t>(reader.Read(16));
        if (acs.rs == kEob) {
          bs.ac.push_back(acs);
          break;
        }
        pos += (acs.rs == kZrl) ? 16 : (acs.rs >> 4) + 1;
        bs.ac.push_back(acs);
        continue;
      }
      acs.rs = static_cast<uint8_t>(s);
      if (acs.rs == kEob) {
        bs.ac.push_back(acs);
        break;
      }
      if (acs.rs == kZrl) {
        pos += 16;
        bs.ac.push_back(acs);
        continue;
      }
      const int size = acs.rs & 0xF;
      acs.value = static_cast<int16_t>(AmplitudeDecode(static_cast<uint16_t>(reader.Read(size)), size));
      pos += (acs.rs >> 4) + 1;
      bs.ac.push_back(acs);
    }
    out.push_back(std::move(bs));
  }
  return out;
}

}  // namespace qtune
