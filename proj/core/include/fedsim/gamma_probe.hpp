#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/nn.hpp"

namespace fedsim::gamma {

// iid-sample draws mini-batches uniformly from the whole dataset;
// single-class draws each mini-batch from one label's samples, the harshest
// sorted-partition client.
enum class DataMode { IidSample, SingleClass };

std::string to_string(DataMode mode);

struct ProbeConfig {
  std::vector<int> batch_sizes;  // strictly increasing s values
  int trials = 500;
  DataMode mode = DataMode::IidSample;
  // Enumerate every size-s subset (iid-sample only; needs a small dataset).
  bool exhaustive = false;
};

struct SignProbeResult {
  DataMode mode = DataMode::IidSample;
  int trials = 0;
  std::size_t kept_parameters = 0;  // |reference gradient| > 1e-12
  std::vector<int> batch_sizes;
  std::vector<double> gamma_mean;                // per s
  std::vector<std::array<double, 3>> quantiles;  // per s: p25, p50, p75
};

// Exact mean gradient over the whole dataset (the s = n reference).
nn::GradVector full_gradient(const nn::ModelParams& params,
                             const data::Dataset& d);

// Empirical per-parameter probability that a size-s mini-batch gradient sign
// matches the full-data gradient sign (sign(0) = +1). Mini-batches are drawn
// without replacement within a batch. Parameters whose reference gradient is
// within 1e-12 of zero are excluded from the aggregation.
SignProbeResult gamma_estimate(const nn::ModelParams& params,
                               const data::Dataset& d, const ProbeConfig& cfg,
                               std::uint64_t seed);

struct GammaRow {
  std::string mode;
  int s = 0;
  int trials = 0;
  double mean = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0;
};

struct GammaReport {
  std::vector<GammaRow> rows;
  // Per mode: true when mean gamma never drops more than 0.03 between
  // consecutive sizes and rises by more than 0.05 overall.
  std::vector<std::pair<std::string, bool>> growth_flags;
};

GammaReport gamma_report(std::span<const SignProbeResult> results);

// CSV with header mode,s,trials,gamma_mean,gamma_p25,gamma_p50,gamma_p75.
std::string gamma_csv(const GammaReport& report);

}  // namespace fedsim::gamma
