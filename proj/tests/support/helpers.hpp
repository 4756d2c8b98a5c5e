#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/nn.hpp"

namespace testsupport {

// Central finite differences of the mean cross-entropy loss, the
// independent oracle for the analytic gradient.
inline fedsim::nn::GradVector finite_diff_gradient(
    const fedsim::nn::ModelParams& params, const fedsim::nn::Batch& batch,
    double h = 1e-4) {
  fedsim::nn::GradVector grad(params.values.size(), 0.0);
  fedsim::nn::ModelParams probe = params;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    probe.values[i] = params.values[i] + h;
    const double up = fedsim::nn::forward_loss(probe, batch).loss;
    probe.values[i] = params.values[i] - h;
    const double down = fedsim::nn::forward_loss(probe, batch).loss;
    probe.values[i] = params.values[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double max_relative_error(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-8});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

// Writes an IDX image/label pair; pixels arrive as bytes already.
inline void write_idx_pair(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path,
                           const std::vector<std::vector<unsigned char>>& images,
                           const std::vector<unsigned char>& labels,
                           std::uint32_t rows, std::uint32_t cols,
                           std::uint32_t images_magic = 0x00000803,
                           std::uint32_t labels_magic = 0x00000801) {
  std::ofstream img(images_path, std::ios::binary);
  write_be32(img, images_magic);
  write_be32(img, static_cast<std::uint32_t>(images.size()));
  write_be32(img, rows);
  write_be32(img, cols);
  for (const auto& image : images)
    img.write(reinterpret_cast<const char*>(image.data()),
              static_cast<std::streamsize>(image.size()));
  std::ofstream lab(labels_path, std::ios::binary);
  write_be32(lab, labels_magic);
  write_be32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

// Quantizes a dataset to bytes and writes it as an IDX pair (rows=1,
// cols=dim). Exercises the same ingestion path real MNIST files take.
inline void dataset_to_idx(const fedsim::data::Dataset& d,
                           const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path) {
  std::vector<std::vector<unsigned char>> images(d.size());
  std::vector<unsigned char> labels(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    images[i].resize(d.dim());
    const double* row = d.features.row(i);
    for (std::size_t j = 0; j < d.dim(); ++j)
      images[i][j] = static_cast<unsigned char>(
          std::lround(std::clamp(row[j], 0.0, 1.0) * 255.0));
    labels[i] = static_cast<unsigned char>(d.labels[i]);
  }
  write_idx_pair(images_path, labels_path, images, labels, 1,
                 static_cast<std::uint32_t>(d.dim()));
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("fedsim_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
