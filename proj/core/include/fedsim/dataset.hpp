#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "fedsim/matrix.hpp"

namespace fedsim::data {

// Feature matrix in [0,1] plus integer class labels.
struct Dataset {
  Matrix features;              // n x d
  std::vector<int> labels;      // n entries, each < class_count
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols; }

  // Throws on empty data, label out of range, or non-finite features.
  void validate() const;
};

// Parses the IDX image/label pair (big-endian magic 0x00000803 / 0x00000801).
// Pixel bytes are scaled by 1/255. Missing files raise ConfigError; bad magic
// or a count mismatch between the two files raise FormatError.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

// Gaussian blobs: one mean per class drawn uniformly in [0,1]^dim from the
// seed, sample noise sigma 0.15, clamped to [0,1]. Samples are grouped by
// class (label c occupies rows [c*per_class, (c+1)*per_class)).
Dataset synth_generate(int classes, int per_class, int dim, std::uint64_t seed);

// Stratified tail split: the last ceil(test_fraction * count) samples of each
// class go to the second dataset.
std::pair<Dataset, Dataset> split_holdout(const Dataset& d, double test_fraction);

// Row-wise concatenation; class counts must agree.
Dataset concat(const Dataset& a, const Dataset& b);

// Rows of `d` selected by index, in order.
Dataset subset(const Dataset& d, const std::vector<std::uint32_t>& indices);

}  // namespace fedsim::data
