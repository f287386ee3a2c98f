#include "lrnet/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "lrnet/core/error.hpp"

namespace lrnet::data {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("split must be train, val or test, got '" + name + "'");
}

Dataset from_idx(const std::string& name, Split split, const IdxFile& images, const IdxFile& labels) {
  if (!images.is_images() || images.rank() != 3) throw DataError(name + ": image file is not a rank-3 IDX");
  if (!labels.is_labels() || labels.rank() != 1) throw DataError(name + ": label file is not a rank-1 IDX");
  const std::size_t n = images.dims[0], h = images.dims[1], w = images.dims[2];
  if (labels.dims[0] != n) {
    throw DataError(name + ": " + std::to_string(n) + " images but " + std::to_string(labels.dims[0]) + " labels");
  }
  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.images = Tensor(Shape{n, h, w, 1});
  float* dst = ds.images.raw();
  for (std::size_t i = 0; i < images.payload.size(); ++i) dst[i] = static_cast<float>(images.payload[i]) / 255.0f;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t l = labels.payload[i];
    if (l >= kNumClasses) throw DataError(name + ": label " + std::to_string(l) + " at index " + std::to_string(i));
    ds.labels[i] = l;
  }
  return ds;
}

Dataset load_dataset(const std::string& name, Split split, const std::string& cache_dir, const Manifest& manifest) {
  if (split == Split::val) throw ConfigError("the val split is carved out of train; load train and split it");
  const std::string prefix = split == Split::train ? "train" : "test";
  const ManifestFile& img = manifest.file(name, prefix + "_images");
  const ManifestFile& lab = manifest.file(name, prefix + "_labels");
  const Bytes img_bytes = read_verified(cache_dir, name, img);
  const Bytes lab_bytes = read_verified(cache_dir, name, lab);
  Dataset raw = from_idx(name, split, parse_idx(img_bytes), parse_idx(lab_bytes));
  raw.source_checksums[img.filename] = sha256_hex(img_bytes);
  raw.source_checksums[lab.filename] = sha256_hex(lab_bytes);
  return resize_dataset(raw);
}

std::vector<float> resize_bilinear(const float* src, std::size_t in_h, std::size_t in_w, std::size_t out_h,
                                   std::size_t out_w) {
  struct Tap {
    std::size_t i0, i1;
    float f;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
      double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      t[d] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(s - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);
  std::vector<float> out(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const float* r0 = src + ty[y].i0 * in_w;
    const float* r1 = src + ty[y].i1 * in_w;
    const float fy = ty[y].f;
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& t = tx[x];
      const float top = r0[t.i0] * (1.0f - t.f) + r0[t.i1] * t.f;
      const float bot = r1[t.i0] * (1.0f - t.f) + r1[t.i1] * t.f;
      out[y * out_w + x] = top * (1.0f - fy) + bot * fy;
    }
  }
  return out;
}

Tensor resize_bilinear_28_to_35(const Tensor& image) {
  const Shape& s = image.shape();
  const bool ok = (s.size() == 2 || (s.size() == 3 && s[2] == 1)) && s[0] == kSourceExtent && s[1] == kSourceExtent;
  if (!ok) throw ShapeError("resize expects a 28x28 image, got " + shape_to_string(s));
  Shape out_shape = s;
  out_shape[0] = out_shape[1] = kModelExtent;
  return Tensor(out_shape, resize_bilinear(image.raw(), kSourceExtent, kSourceExtent, kModelExtent, kModelExtent));
}

Dataset resize_dataset(const Dataset& ds, std::size_t extent) {
  const Shape4 s = Shape4::of(ds.images.shape());
  if (s.c != 1) throw ShapeError("resize_dataset expects single-channel images");
  Dataset out;
  out.name = ds.name;
  out.split = ds.split;
  out.labels = ds.labels;
  out.source_checksums = ds.source_checksums;
  out.images = Tensor(Shape{s.n, extent, extent, 1});
  const std::size_t in_px = s.h * s.w, out_px = extent * extent;
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto img = resize_bilinear(ds.images.raw() + i * in_px, s.h, s.w, extent, extent);
    std::memcpy(out.images.raw() + i * out_px, img.data(), out_px * sizeof(float));
  }
  return out;
}

Dataset take(const Dataset& ds, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("cannot take an empty subset of " + ds.name);
  Dataset out;
  out.name = ds.name;
  out.split = ds.split;
  out.source_checksums = ds.source_checksums;
  Batch b = gather(ds, indices);
  out.images = std::move(b.images);
  out.labels = std::move(b.labels);
  return out;
}

Dataset head(const Dataset& ds, std::size_t n) {
  if (n == 0 || n >= ds.size()) return ds;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return take(ds, idx);
}

TrainValSplit stratified_split(const std::vector<std::int32_t>& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("val_fraction must lie strictly between 0 and 1, got " + std::to_string(fraction));
  }
  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);

  std::mt19937_64 rng(seed);
  TrainValSplit out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) throw DataError("class " + std::to_string(c) + " has fewer than 2 samples");
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
    out.val.insert(out.val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& train, double fraction, std::uint64_t seed) {
  const auto s = stratified_split(train.labels, fraction, seed);
  if (s.val.empty()) throw DataError("validation split of " + train.name + " is empty");
  Dataset tr = take(train, s.train);
  Dataset va = take(train, s.val);
  tr.split = Split::train;
  va.split = Split::val;
  return {std::move(tr), std::move(va)};
}

std::vector<std::size_t> BatchIterator::order(std::size_t n, std::uint64_t epoch) const {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (shuffle) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  return idx;
}

std::vector<std::vector<std::size_t>> BatchIterator::batches(std::size_t n, std::uint64_t epoch) const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  const auto idx = order(n, epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start), idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
  const Shape4 s = Shape4::of(ds.images.shape());
  const std::size_t px = s.h * s.w * s.c;
  Batch b;
  b.images = Tensor(Shape{indices.size(), s.h, s.w, s.c});
  b.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t j = indices[i];
    if (j >= ds.size()) throw DataError("sample index " + std::to_string(j) + " out of range");
    std::memcpy(b.images.raw() + i * px, ds.images.raw() + j * px, px * sizeof(float));
    b.labels[i] = ds.labels[j];
  }
  return b;
}

}  // namespace lrnet::data
