// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/dataset.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qtune/rng.h"

namespace qtune {

namespace fs = std::filesystem;

void DatasetSpec::Validate() const {
  if (classes < 2) throw std::invalid_argument("DatasetSpec: classes must be >= 2");
  if (kind == DatasetKind::kSynthetic) {
    if (height < 16 || width < 16) {
      throw std::invalid_argument("DatasetSpec: synthetic images must be at least 16x16");
    }
    if (train_count < 1) throw std::invalid_argument("DatasetSpec: train_count must be >= 1");
  } else if (path.empty()) {
    throw std::invalid_argument("DatasetSpec: path required for this dataset kind");
  }
  if (label_bytes < 1 || label_bytes > 4) {
    throw std::invalid_argument("DatasetSpec: label_bytes must be in [1,4]");
  }
}

namespace {

// --- synthetic ---------------------------------------------------------------

struct FreqComponent {
  int u = 0, v = 0;
  double wy = 0.0, wcb = 0.0, wcr = 0.0;
};

struct SyntheticModel {
  std::vector<FreqComponent> signal_basis;            // shared low-freq basis
  std::vector<std::vector<double>> class_weights;     // per class, per basis entry
  std::vector<FreqComponent> nuisance_basis;          // low-freq, class-independent
  std::vector<FreqComponent> noise_basis;             // high-freq texture
};

SyntheticModel BuildSyntheticModel(const DatasetSpec& spec) {
  SyntheticModel m;
  Rng rng(spec.seed ^ 0xC0FFEE5EEDull);
  // Low-frequency signal basis, distinct (u,v) with u+v in [1,3].
  std::set<std::pair<int, int>> used;
  while (m.signal_basis.size() < 6) {
    const int u = static_cast<int>(rng.NextBelow(4));
    const int v = static_cast<int>(rng.NextBelow(4));
    if (u + v < 1 || u + v > 3 || used.count({u, v})) continue;
    used.insert({u, v});
    FreqComponent f;
    f.u = u;
    f.v = v;
    f.wy = 1.0;
    f.wcb = 0.25 * (2.0 * rng.NextDouble() - 1.0);
    f.wcr = 0.25 * (2.0 * rng.NextDouble() - 1.0);
    m.signal_basis.push_back(f);
  }
  // Per-class unit coefficient vectors, scaled below at sampling time.
  m.class_weights.resize(static_cast<size_t>(spec.classes));
  for (auto& w : m.class_weights) {
    w.resize(m.signal_basis.size());
    double norm = 0.0;
    for (double& x : w) {
      x = rng.NextGaussian();
      norm += x * x;
    }
    norm = std::sqrt(std::max(norm, 1e-9));
    for (double& x : w) x /= norm;
  }
  for (int i = 0; i < 3; ++i) {
    FreqComponent f;
    f.u = static_cast<int>(rng.NextBelow(3));
    f.v = static_cast<int>(rng.NextBelow(3));
    f.wy = 1.0;
    m.nuisance_basis.push_back(f);
  }
  for (int i = 0; i < 5; ++i) {
    FreqComponent f;
    f.u = 5 + static_cast<int>(rng.NextBelow(3));
    f.v = 5 + static_cast<int>(rng.NextBelow(3));
    f.wy = 1.0;
    m.noise_basis.push_back(f);
  }
  return m;
}

// Blockwise cosine pattern matching the 8x8 DCT basis frequencies, tiled
// over the plane.
void AddCosine(Plane& p, int u, int v, double amp) {
  const double pi = 3.14159265358979323846;
  for (int y = 0; y < p.h; ++y) {
    const double cy = std::cos((2 * (y % 8) + 1) * u * pi / 16.0);
    for (int x = 0; x < p.w; ++x) {
      p.at(y, x) += amp * cy * std::cos((2 * (x % 8) + 1) * v * pi / 16.0);
    }
  }
}

const SyntheticModel& ModelFor(const DatasetSpec& spec) {
  // Synthetic corpora are generated once per (seed, classes) in practice;
  // cache the last model.
  static SyntheticModel model;
  static uint64_t cached_seed = ~0ull;
  static int cached_classes = -1;
  if (cached_seed != spec.seed || cached_classes != spec.classes) {
    model = BuildSyntheticModel(spec);
    cached_seed = spec.seed;
    cached_classes = spec.classes;
  }
  return model;
}

}  // namespace

ImageRGB SyntheticSample(const DatasetSpec& spec, int split, int index, int label) {
  const SyntheticModel& m = ModelFor(spec);
  Rng rng(spec.seed * 0x9E3779B97F4A7C15ull + (static_cast<uint64_t>(split) << 40) +
          static_cast<uint64_t>(index) * 0xBF58476D1CE4E5B9ull + 1);

  Plane y(spec.height, spec.width, 0.0);
  Plane cb(spec.height, spec.width, 0.0);
  Plane cr(spec.height, spec.width, 0.0);

  // Class-informative low-frequency structure.
  const double gain = 26.0 * (0.8 + 0.4 * rng.NextDouble());
  const auto& w = m.class_weights[static_cast<size_t>(label)];
  for (size_t k = 0; k < m.signal_basis.size(); ++k) {
    const FreqComponent& f = m.signal_basis[k];
    const double a = gain * w[k];
    AddCosine(y, f.u, f.v, a * f.wy);
    AddCosine(cb, f.u, f.v, a * f.wcb);
    AddCosine(cr, f.u, f.v, a * f.wcr);
  }
  // Class-independent low-frequency nuisance.
  for (const FreqComponent& f : m.nuisance_basis) {
    AddCosine(y, f.u, f.v, 10.0 * rng.NextGaussian());
  }
  // Expensive-to-code, classification-irrelevant high-frequency texture.
  for (const FreqComponent& f : m.noise_basis) {
    AddCosine(y, f.u, f.v, 14.0 * rng.NextGaussian());
  }
  // Mild chroma cast per sample.
  const double cast_cb = 12.0 * rng.NextGaussian();
  const double cast_cr = 12.0 * rng.NextGaussian();

  ImageRGB img(spec.height, spec.width);
  for (int yy = 0; yy < spec.height; ++yy) {
    for (int xx = 0; xx < spec.width; ++xx) {
      const double vy = 128.0 + y.at(yy, xx) + 4.0 * rng.NextGaussian();
      const double vcb = cb.at(yy, xx) + cast_cb;
      const double vcr = cr.at(yy, xx) + cast_cr;
      // BT.601 inverse.
      img.r.at(yy, xx) = ClampPixel(vy + 1.402 * vcr);
      img.g.at(yy, xx) = ClampPixel(vy - 0.344136 * vcb - 0.714136 * vcr);
      img.b.at(yy, xx) = ClampPixel(vy + 1.772 * vcb);
    }
  }
  return img;
}

namespace {

void IngestSynthetic(const DatasetSpec& spec, Dataset& out) {
  Rng label_rng(spec.seed ^ 0x1ABE15ull);
  out.train_images.reserve(static_cast<size_t>(spec.train_count));
  for (int i = 0; i < spec.train_count; ++i) {
    const int label = static_cast<int>(label_rng.NextBelow(static_cast<uint64_t>(spec.classes)));
    out.train_images.push_back(SyntheticSample(spec, 0, i, label));
    out.train_labels.push_back(label);
  }
  for (int i = 0; i < spec.val_count; ++i) {
    const int label = static_cast<int>(label_rng.NextBelow(static_cast<uint64_t>(spec.classes)));
    out.val_images.push_back(SyntheticSample(spec, 1, i, label));
    out.val_labels.push_back(label);
  }
  out.classes = spec.classes;
}

void ReadCifarFile(const std::string& path, int label_bytes, int classes,
                   std::vector<ImageRGB>& images, std::vector<int>& labels) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  f.seekg(0, std::ios::end);
  const int64_t size = f.tellg();
  f.seekg(0);
  const int64_t record = label_bytes + 3072;
  if (size % record != 0) {
    throw std::runtime_error(path + ": size " + std::to_string(size) +
                             " is not a multiple of the record size " + std::to_string(record) +
                             "; first partial record at byte offset " +
                             std::to_string(size - size % record));
  }
  std::vector<uint8_t> buf(static_cast<size_t>(record));
  const int64_t count = size / record;
  for (int64_t i = 0; i < count; ++i) {
    if (!f.read(reinterpret_cast<char*>(buf.data()), record)) {
      throw std::runtime_error(path + ": short read at byte offset " + std::to_string(i * record));
    }
    const int label = buf[static_cast<size_t>(label_bytes - 1)];
    if (label >= classes) {
      throw std::runtime_error(path + ": label " + std::to_string(label) +
                               " out of range at byte offset " + std::to_string(i * record));
    }
    ImageRGB img(32, 32);
    const uint8_t* px = buf.data() + label_bytes;
    for (int p = 0; p < 1024; ++p) {
      img.r.v[static_cast<size_t>(p)] = px[p];
      img.g.v[static_cast<size_t>(p)] = px[1024 + p];
      img.b.v[static_cast<size_t>(p)] = px[2048 + p];
    }
    images.push_back(std::move(img));
    labels.push_back(label);
  }
}

void IngestCifar(const DatasetSpec& spec, Dataset& out) {
  std::vector<std::string> train_files, val_files;
  if (fs::is_directory(spec.path)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(spec.path)) {
      if (e.path().extension() == ".bin") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const std::string& fpath : files) {
      const std::string name = fs::path(fpath).filename().string();
      if (name.find("test") != std::string::npos || name.find("val") != std::string::npos) {
        val_files.push_back(fpath);
      } else {
        train_files.push_back(fpath);
      }
    }
    if (train_files.empty()) {
      throw std::runtime_error(spec.path + ": no training .bin files found");
    }
  } else {
    train_files.push_back(spec.path);
  }
  for (const std::string& fpath : train_files) {
    ReadCifarFile(fpath, spec.label_bytes, spec.classes, out.train_images, out.train_labels);
  }
  for (const std::string& fpath : val_files) {
    ReadCifarFile(fpath, spec.label_bytes, spec.classes, out.val_images, out.val_labels);
  }
  out.classes = spec.classes;
}

void IngestFolder(const DatasetSpec& spec, Dataset& out) {
  if (!fs::is_directory(spec.path)) throw std::runtime_error(spec.path + ": not a directory");
  const bool has_splits =
      fs::is_directory(fs::path(spec.path) / "train") || fs::is_directory(fs::path(spec.path) / "val");

  auto load_split = [&](const fs::path& root, std::vector<ImageRGB>& images,
                        std::vector<int>& labels, std::map<std::string, int>& class_ids) {
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) class_dirs.push_back(e.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const fs::path& dir : class_dirs) {
      const std::string cname = dir.filename().string();
      if (!class_ids.count(cname)) {
        const int id = static_cast<int>(class_ids.size());
        class_ids[cname] = id;
      }
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".ppm") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& fp : files) {
        images.push_back(LoadImage(fp.string()));
        labels.push_back(class_ids[cname]);
      }
    }
  };

  std::map<std::string, int> class_ids;
  if (has_splits) {
    load_split(fs::path(spec.path) / "train", out.train_images, out.train_labels, class_ids);
    if (fs::is_directory(fs::path(spec.path) / "val")) {
      load_split(fs::path(spec.path) / "val", out.val_images, out.val_labels, class_ids);
    }
  } else {
    load_split(spec.path, out.train_images, out.train_labels, class_ids);
  }
  out.classes = static_cast<int>(class_ids.size());
  if (out.classes < 2) throw std::runtime_error(spec.path + ": need at least 2 class directories");
}

void ApplySubsets(const DatasetSpec& spec, Dataset& ds) {
  Rng rng(spec.subset_seed ^ 0x5B5E7ull);
  if (spec.class_subset > 0 && spec.class_subset < ds.classes) {
    std::vector<int> all(ds.classes);
    for (int i = 0; i < ds.classes; ++i) all[static_cast<size_t>(i)] = i;
    rng.Shuffle(all);
    all.resize(static_cast<size_t>(spec.class_subset));
    std::sort(all.begin(), all.end());
    std::map<int, int> remap;
    for (size_t i = 0; i < all.size(); ++i) remap[all[i]] = static_cast<int>(i);

    auto filter = [&](std::vector<ImageRGB>& images, std::vector<int>& labels) {
      std::vector<ImageRGB> fi;
      std::vector<int> fl;
      for (size_t i = 0; i < images.size(); ++i) {
        auto it = remap.find(labels[i]);
        if (it == remap.end()) continue;
        fi.push_back(std::move(images[i]));
        fl.push_back(it->second);
      }
      images = std::move(fi);
      labels = std::move(fl);
    };
    filter(ds.train_images, ds.train_labels);
    filter(ds.val_images, ds.val_labels);
    ds.classes = spec.class_subset;
  }

  auto subsample = [&rng](std::vector<ImageRGB>& images, std::vector<int>& labels, size_t n) {
    if (n == 0 || n >= images.size()) return;
    std::vector<size_t> idx(images.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.Shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<ImageRGB> si;
    std::vector<int> sl;
    si.reserve(n);
    for (size_t i : idx) {
      si.push_back(std::move(images[i]));
      sl.push_back(labels[i]);
    }
    images = std::move(si);
    labels = std::move(sl);
  };
  subsample(ds.train_images, ds.train_labels, spec.train_subset);
  subsample(ds.val_images, ds.val_labels, spec.val_subset);
}

}  // namespace

Dataset IngestDataset(const DatasetSpec& spec) {
  spec.Validate();
  Dataset ds;
  switch (spec.kind) {
    case DatasetKind::kSynthetic:
      IngestSynthetic(spec, ds);
      break;
    case DatasetKind::kCifarBinary:
      IngestCifar(spec, ds);
      break;
    case DatasetKind::kImageFolder:
      IngestFolder(spec, ds);
      break;
  }
  ApplySubsets(spec, ds);
  return ds;
}

std::string DatasetSummary(const Dataset& ds) {
  std::ostringstream os;
  os << "train=" << ds.train_images.size() << " val=" << ds.val_images.size()
     << " classes=" << ds.classes;
  if (!ds.train_images.empty()) {
    os << " size=" << ds.train_images[0].height() << "x" << ds.train_images[0].width();
  }
  std::vector<int> counts(static_cast<size_t>(ds.classes), 0);
  for (int l : ds.train_labels) ++counts[static_cast<size_t>(l)];
  int mn = ds.train_labels.empty() ? 0 : counts[0], mx = mn;
  for (int c : counts) {
    mn = std::min(mn, c);
    mx = std::max(mx, c);
  }
  os << " train-per-class=[" << mn << "," << mx << "]";
  return os.str();
}

}  // namespace qtune
