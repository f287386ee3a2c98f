#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lrnet/core/tensor.hpp"
#include "lrnet/data/fetch.hpp"

namespace lrnet::data {

enum class Split { train, val, test };

std::string split_name(Split s);
/// Throws ConfigError.
Split parse_split(const std::string& name);

inline constexpr std::size_t kNumClasses = 10;
inline constexpr std::size_t kSourceExtent = 28;
inline constexpr std::size_t kModelExtent = 35;

struct Dataset {
  std::string name;
  Split split = Split::train;
  Tensor images;  // [N,H,W,1] in [0,1]
  std::vector<std::int32_t> labels;
  std::map<std::string, std::string> source_checksums;

  std::size_t size() const { return labels.size(); }
};

/// Builds a dataset from decoded image and label files, scaling each pixel
/// by 1/255. Throws DataError on count mismatch or labels outside 0..9.
Dataset from_idx(const std::string& name, Split split, const IdxFile& images, const IdxFile& labels);

/// Loads the train or test split from the verified cache, resized to 35x35.
/// `val` is not a stored split; see split_train_val. Throws DataError if the
/// files are not cached.
Dataset load_dataset(const std::string& name, Split split, const std::string& cache_dir, const Manifest& manifest);

/// Bilinear resize of one [H,W] single-channel image with half-pixel centers
/// (s = (d + 0.5) * in/out - 0.5) and source coordinates clamped to the image.
std::vector<float> resize_bilinear(const float* src, std::size_t in_h, std::size_t in_w, std::size_t out_h,
                                   std::size_t out_w);

/// [28,28] or [28,28,1] -> [35,35] (same rank). Throws ShapeError otherwise.
Tensor resize_bilinear_28_to_35(const Tensor& image);

/// Resizes every image of a [N,H,W,1] dataset to [N,35,35,1].
Dataset resize_dataset(const Dataset& ds, std::size_t extent = kModelExtent);

/// Rows `indices` of `ds` in the given order.
Dataset take(const Dataset& ds, const std::vector<std::size_t>& indices);

/// First `n` samples, or all of them when n is 0 or exceeds the size.
Dataset head(const Dataset& ds, std::size_t n);

struct TrainValSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Stratified split: each class contributes floor(fraction * n_c) shuffled
/// samples to val. Both index lists come back sorted. Throws ConfigError
/// unless 0 < fraction < 1, DataError if a present class has < 2 samples.
TrainValSplit stratified_split(const std::vector<std::int32_t>& labels, double fraction, std::uint64_t seed);

std::pair<Dataset, Dataset> split_train_val(const Dataset& train, double fraction, std::uint64_t seed);

/// Shuffled batches keyed by (seed, epoch); the last partial batch is kept.
struct BatchIterator {
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  bool shuffle = true;

  /// Permutation of 0..n-1 for `epoch`.
  std::vector<std::size_t> order(std::size_t n, std::uint64_t epoch) const;
  /// Index lists of each batch for `epoch`.
  std::vector<std::vector<std::size_t>> batches(std::size_t n, std::uint64_t epoch) const;
};

struct Batch {
  Tensor images;
  std::vector<std::int32_t> labels;
};

/// Gathers `indices` into one [B,H,W,C] batch.
Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace lrnet::data
