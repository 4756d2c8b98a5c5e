#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedsim/engine.hpp"

namespace fedsim::report {

struct SyntheticSpec {
  int classes = 10;
  int per_class = 60;
  int dim = 32;
  int test_per_class = 20;
  std::uint64_t seed = 7;

  bool operator==(const SyntheticSpec&) const = default;
};

struct IdxSpec {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::size_t train_limit = 0;  // 0 = all samples

  bool operator==(const IdxSpec&) const = default;
};

using DatasetSpec = std::variant<SyntheticSpec, IdxSpec>;

struct ModelSpec {
  bool logreg = false;
  std::vector<std::size_t> hidden{200};

  bool operator==(const ModelSpec&) const = default;
};

struct GammaSpec {
  std::vector<int> batch_sizes{1, 4, 16, 64};
  int trials = 500;
  int pretrain_epochs = 1;
  bool iid = true;
  bool single_class = true;
};

struct ExperimentSpec {
  std::string name;
  std::filesystem::path out_dir = "runs";
  DatasetSpec dataset = SyntheticSpec{};
  ModelSpec model;
  engine::FederatedConfig fed;  // arch is filled in after the data loads
  GammaSpec gamma;
};

// Strict parse of the JSON experiment config; unknown keys, type mismatches
// and constraint violations raise ConfigError naming the key path. Omitted
// keys take the baseline defaults (100 clients, 10% participation, batch 20).
ExperimentSpec parse_config_text(const std::string& text);
ExperimentSpec parse_config(const std::filesystem::path& path);

struct LoadedData {
  data::Dataset train;
  data::Dataset test;
};

LoadedData load_dataset(const DatasetSpec& spec);

nn::ModelArch build_arch(const ModelSpec& model, const data::Dataset& train);

// CSV with header
// round,strategy,test_accuracy,test_loss,bits_up,bits_down,participants,uploads_skipped
// one row per executed round (plus round 0); reals carry 6 significant
// digits, unevaluated rounds leave the accuracy/loss cells empty.
std::string metrics_csv(const engine::RunResult& result);

// Full-precision companion document: final accuracy, rounds to target,
// total bits both ways, wall time.
std::string summary_json(const engine::RunResult& result);

// Long-format merge plus a per-strategy summary table with the
// rounds-to-target ratio column (target defaults to 0.8).
std::string compare_summary_csv(const std::vector<engine::RunResult>& results,
                                const std::vector<std::string>& names);

// Per-client label histogram, long format client,label,count.
std::string partition_histogram_csv(const data::PartitionPlan& plan,
                                    const data::Dataset& d);

// Subcommand bodies. Exit status 0 on success, 1 for configuration
// problems, 2 for runtime failures; diagnostics go to stderr.
int cmd_run(const ExperimentSpec& spec);
int cmd_compare(const std::vector<ExperimentSpec>& specs);
int cmd_gamma(const ExperimentSpec& spec);
int cmd_partition(const ExperimentSpec& spec);

}  // namespace fedsim::report
