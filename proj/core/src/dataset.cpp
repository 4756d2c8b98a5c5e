#include "fedsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::data {

void Dataset::validate() const {
  if (labels.empty()) throw Error("dataset is empty");
  if (features.rows != labels.size())
    throw ShapeError("dataset feature/label counts differ");
  if (class_count < 1) throw ConfigError("dataset class count must be >= 1");
  for (int y : labels)
    if (y < 0 || y >= class_count) throw ShapeError("dataset label out of range");
  for (double v : features.data)
    if (!std::isfinite(v)) throw NumericError("dataset feature not finite");
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw FormatError(std::string("idx: truncated ") + what);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::ifstream open_binary(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot open file: " + p.string());
  return f;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  std::ifstream img = open_binary(images_path);
  std::ifstream lab = open_binary(labels_path);

  const std::uint32_t img_magic = read_be32(img, "image magic");
  if (img_magic != kImagesMagic)
    throw FormatError("idx: bad image magic " + std::to_string(img_magic));
  const std::uint32_t n_img = read_be32(img, "image count");
  const std::uint32_t rows = read_be32(img, "row count");
  const std::uint32_t cols = read_be32(img, "column count");

  const std::uint32_t lab_magic = read_be32(lab, "label magic");
  if (lab_magic != kLabelsMagic)
    throw FormatError("idx: bad label magic " + std::to_string(lab_magic));
  const std::uint32_t n_lab = read_be32(lab, "label count");

  if (n_img != n_lab)
    throw FormatError("idx: image count " + std::to_string(n_img) +
                      " != label count " + std::to_string(n_lab));

  const std::size_t dim = std::size_t(rows) * cols;
  Dataset d;
  d.features = Matrix(n_img, dim);
  d.labels.resize(n_img);

  std::vector<unsigned char> pixel_row(dim);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(pixel_row.data()),
             static_cast<std::streamsize>(dim));
    if (!img) throw FormatError("idx: truncated image data");
    double* out = d.features.row(i);
    for (std::size_t j = 0; j < dim; ++j)
      out[j] = static_cast<double>(pixel_row[j]) / 255.0;
  }
  std::vector<unsigned char> label_bytes(n_lab);
  lab.read(reinterpret_cast<char*>(label_bytes.data()),
           static_cast<std::streamsize>(n_lab));
  if (!lab) throw FormatError("idx: truncated label data");

  int max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    d.labels[i] = static_cast<int>(label_bytes[i]);
    max_label = std::max(max_label, d.labels[i]);
  }
  d.class_count = max_label + 1;
  return d;
}

Dataset synth_generate(int classes, int per_class, int dim, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synth_generate: classes must be >= 2");
  if (per_class < 1) throw ConfigError("synth_generate: per_class must be >= 1");
  if (dim < 1) throw ConfigError("synth_generate: dim must be >= 1");

  const std::size_t n = std::size_t(classes) * per_class;
  Dataset d;
  d.features = Matrix(n, dim);
  d.labels.resize(n);
  d.class_count = classes;

  auto mean_eng = rng::make_engine(seed, rng::Purpose::SynthMeans);
  Matrix means(classes, dim);
  for (double& v : means.data) v = rng::uniform01(mean_eng);

  auto noise_eng = rng::make_engine(seed, rng::Purpose::SynthNoise);
  constexpr double kSigma = 0.15;
  std::size_t row = 0;
  for (int c = 0; c < classes; ++c) {
    const double* mean = means.row(c);
    for (int s = 0; s < per_class; ++s, ++row) {
      double* out = d.features.row(row);
      for (int j = 0; j < dim; ++j)
        out[j] = std::clamp(mean[j] + kSigma * rng::normal(noise_eng), 0.0, 1.0);
      d.labels[row] = c;
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& d, double test_fraction) {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw ConfigError("split_holdout: test_fraction must be in [0,1)");

  std::vector<std::vector<std::uint32_t>> by_class(d.class_count);
  for (std::size_t i = 0; i < d.size(); ++i)
    by_class[static_cast<std::size_t>(d.labels[i])].push_back(
        static_cast<std::uint32_t>(i));

  std::vector<std::uint32_t> train_idx, test_idx;
  for (const auto& members : by_class) {
    const std::size_t n_test = static_cast<std::size_t>(
        std::ceil(test_fraction * static_cast<double>(members.size())));
    const std::size_t n_train = members.size() - n_test;
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + n_train);
    test_idx.insert(test_idx.end(), members.begin() + n_train, members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {subset(d, train_idx), subset(d, test_idx)};
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.class_count != b.class_count)
    throw ShapeError("concat: class counts differ");
  if (a.dim() != b.dim()) throw ShapeError("concat: feature dimensions differ");
  Dataset out;
  out.class_count = a.class_count;
  out.features = Matrix(a.size() + b.size(), a.dim());
  std::copy(a.features.data.begin(), a.features.data.end(),
            out.features.data.begin());
  std::copy(b.features.data.begin(), b.features.data.end(),
            out.features.data.begin() +
                static_cast<std::ptrdiff_t>(a.features.data.size()));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

Dataset subset(const Dataset& d, const std::vector<std::uint32_t>& indices) {
  Dataset out;
  out.class_count = d.class_count;
  out.features = Matrix(indices.size(), d.dim());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= d.size())
      throw ShapeError("subset: sample index out of range");
    std::memcpy(out.features.row(i), d.features.row(indices[i]),
                d.dim() * sizeof(double));
    out.labels[i] = d.labels[indices[i]];
  }
  return out;
}

}  // namespace fedsim::data
