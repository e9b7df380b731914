// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qtune/trainer.h"

namespace qtune {

namespace {

constexpr char kMagic[8] = {'Q', 'T', 'C', 'K', 'P', 'T', '0', '1'};

// FNV-1a over a canonical text rendering of the configs.
uint64_t Fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void AppendDouble(std::ostringstream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf << ";";
}

struct Writer {
  std::string buf;
  void Bytes(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
  void U8(uint8_t v) { Bytes(&v, 1); }
  void U32(uint32_t v) { Bytes(&v, 4); }
  void U64(uint64_t v) { Bytes(&v, 8); }
  void I32(int32_t v) { Bytes(&v, 4); }
  void F64(double v) { Bytes(&v, 8); }
  void Str(const std::string& s) {
    U32(static_cast<uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  void TensorData(const Tensor& t) {
    U8(static_cast<uint8_t>(t.rank()));
    for (int d : t.shape()) I32(d);
    Bytes(t.data(), static_cast<size_t>(t.size()) * sizeof(double));
  }
};

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void Bytes(void* p, size_t n) {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  uint8_t U8() {
    uint8_t v;
    Bytes(&v, 1);
    return v;
  }
  uint32_t U32() {
    uint32_t v;
    Bytes(&v, 4);
    return v;
  }
  uint64_t U64() {
    uint64_t v;
    Bytes(&v, 8);
    return v;
  }
  int32_t I32() {
    int32_t v;
    Bytes(&v, 4);
    return v;
  }
  double F64() {
    double v;
    Bytes(&v, 8);
    return v;
  }
  std::string Str() {
    const uint32_t n = U32();
    std::string s(n, '\0');
    Bytes(s.data(), n);
    return s;
  }
  Tensor TensorData() {
    const int rank = U8();
    std::vector<int> shape(static_cast<size_t>(rank));
    for (int i = 0; i < rank; ++i) shape[static_cast<size_t>(i)] = I32();
    Tensor t(shape);
    Bytes(t.data(), static_cast<size_t>(t.size()) * sizeof(double));
    return t;
  }
};

}  // namespace

uint64_t ConfigHash(const TrainConfig& cfg, const ClassifierConfig& cls_cfg) {
  std::ostringstream os;
  os << "mode=" << static_cast<int>(cfg.mode) << ";alt=" << cfg.alternations
     << ";epochs=" << cfg.epochs << ";bs=" << cfg.batch_size << ";";
  AppendDouble(os, cfg.lr_classifier);
  AppendDouble(os, cfg.lr_kernels);
  AppendDouble(os, cfg.lr_color);
  for (const Milestone& m : cfg.milestones) {
    os << "m" << m.at << "=";
    AppendDouble(os, m.scale);
  }
  AppendDouble(os, cfg.loss.lambda);
  AppendDouble(os, cfg.loss.lambda1);
  AppendDouble(os, cfg.loss.c);
  os << "pen=" << static_cast<int>(cfg.loss.penalty) << ";tc=" << cfg.train_color
     << ";seed=" << cfg.seed << ";";
  AppendDouble(os, cfg.clip_norm);
  os << "flip=" << cfg.augment_flip << ";crop=" << cfg.augment_crop << ";";
  AppendDouble(os, cfg.baseline_quality);
  os << "topk=" << cfg.topk << ";qe=" << cfg.quick_eval_images
     << ";qr=" << cfg.quick_rate_train_images << ";hs=" << cfg.huffman_sample << ";";
  os << "cls:mode=" << static_cast<int>(cls_cfg.input_mode) << ";nc=" << cls_cfg.num_classes
     << ";k=" << cls_cfg.width_multiplier << ";b=" << cls_cfg.blocks_per_group
     << ";fe=" << cls_cfg.frontend_channels << ";cseed=" << cls_cfg.seed << ";";
  return Fnv1a(os.str());
}

void SaveCheckpoint(const std::string& path, const TrainSession& session) {
  Writer w;
  w.Bytes(kMagic, sizeof kMagic);
  w.U32(1);  // format version
  w.U64(ConfigHash(session.cfg, session.cls_cfg));
  w.U32(static_cast<uint32_t>(session.next_position));
  w.U64(session.global_step);
  w.Str(session.rng.SerializeState());

  auto& mutable_session = const_cast<TrainSession&>(session);
  std::vector<Param*> params = mutable_session.AllParams();
  w.U32(static_cast<uint32_t>(params.size()));
  for (const Param* p : params) {
    w.Str(p->name);
    w.TensorData(p->value);
  }

  w.U32(static_cast<uint32_t>(session.adam.size()));
  for (const auto& [name, st] : session.adam) {
    w.Str(name);
    w.U64(st.step);
    w.F64(st.beta1);
    w.F64(st.beta2);
    w.F64(st.eps);
    w.TensorData(st.m);
    w.TensorData(st.v);
  }

  w.U32(static_cast<uint32_t>(session.history.size()));
  for (const HistoryRow& r : session.history) {
    w.I32(r.position);
    w.Str(r.phase);
    for (double v : {r.loss, r.cla_loss, r.quan_loss, r.train_acc, r.val_acc, r.mean_kb, r.psnr,
                     r.ssim, r.lr}) {
      w.F64(v);
    }
  }

  w.U32(static_cast<uint32_t>(session.warnings.size()));
  for (const std::string& s : session.warnings) w.Str(s);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("SaveCheckpoint: cannot open " + path);
  f.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!f) throw std::runtime_error("SaveCheckpoint: short write to " + path);
}

namespace {

std::string ReadFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

uint64_t PeekCheckpointHash(const std::string& path) {
  const std::string data = ReadFile(path);
  Reader r(data);
  char magic[8];
  r.Bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a qtune checkpoint");
  }
  r.U32();
  return r.U64();
}

void LoadCodecParams(const std::string& path, CompressionKernels& kernels, ColorTransform& color) {
  const std::string data = ReadFile(path);
  Reader r(data);
  char magic[8];
  r.Bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a qtune checkpoint");
  }
  r.U32();  // version
  r.U64();  // config hash (not enforced for codec-only reads)
  r.U32();  // next position
  r.U64();  // global step
  r.Str();  // rng state
  const uint32_t pcount = r.U32();
  std::vector<Param*> targets{&kernels.y, &kernels.cb, &kernels.cr, &color.matrix,
                              &color.offset};
  size_t found = 0;
  for (uint32_t i = 0; i < pcount; ++i) {
    const std::string name = r.Str();
    Tensor value = r.TensorData();
    for (Param* p : targets) {
      if (p->name == name && p->value.SameShape(value)) {
        p->value = value;
        ++found;
      }
    }
  }
  if (found < targets.size()) {
    throw std::runtime_error(path + ": checkpoint lacks codec parameters");
  }
}

TrainSession LoadCheckpoint(const std::string& path, const TrainConfig& cfg,
                            const ClassifierConfig& cls_cfg) {
  const std::string data = ReadFile(path);
  Reader r(data);
  char magic[8];
  r.Bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a qtune checkpoint");
  }
  const uint32_t version = r.U32();
  if (version != 1) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const uint64_t hash = r.U64();
  if (hash != ConfigHash(cfg, cls_cfg)) {
    throw std::runtime_error(path + ": checkpoint config hash mismatch; refuse to resume");
  }

  TrainSession s = CreateSession(cfg, cls_cfg);
  s.next_position = static_cast<int>(r.U32());
  s.global_step = r.U64();
  s.rng.RestoreState(r.Str());

  std::vector<Param*> params = s.AllParams();
  const uint32_t pcount = r.U32();
  if (pcount != params.size()) {
    throw std::runtime_error(path + ": parameter count mismatch");
  }
  for (uint32_t i = 0; i < pcount; ++i) {
    const std::string name = r.Str();
    Tensor value = r.TensorData();
    bool found = false;
    for (Param* p : params) {
      if (p->name != name) continue;
      if (!p->value.SameShape(value)) {
        throw std::runtime_error(path + ": shape mismatch for parameter " + name);
      }
      p->value = std::move(value);
      found = true;
      break;
    }
    if (!found) throw std::runtime_error(path + ": unknown parameter " + name);
  }

  const uint32_t acount = r.U32();
  for (uint32_t i = 0; i < acount; ++i) {
    const std::string name = r.Str();
    AdamState st;
    st.step = r.U64();
    st.beta1 = r.F64();
    st.beta2 = r.F64();
    st.eps = r.F64();
    st.m = r.TensorData();
    st.v = r.TensorData();
    s.adam.emplace(name, std::move(st));
  }

  const uint32_t hcount = r.U32();
  s.history.resize(hcount);
  for (uint32_t i = 0; i < hcount; ++i) {
    HistoryRow& row = s.history[i];
    row.position = r.I32();
    row.phase = r.Str();
    row.loss = r.F64();
    row.cla_loss = r.F64();
    row.quan_loss = r.F64();
    row.train_acc = r.F64();
    row.val_acc = r.F64();
    row.mean_kb = r.F64();
    row.psnr = r.F64();
    row.ssim = r.F64();
    row.lr = r.F64();
  }

  const uint32_t wcount = r.U32();
  s.warnings.resize(wcount);
  for (uint32_t i = 0; i < wcount; ++i) s.warnings[i] = r.Str();
  return s;
}

}  // namespace qtune
