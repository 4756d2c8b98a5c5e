#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/strategies.hpp"

namespace fedsim::engine {

struct PartitionSettings {
  data::PartitionMode mode = data::PartitionMode::Iid;
  int shards_per_client = 2;
  double pool_gamma = 0.1;  // datashare runs only
};

// Everything a run needs besides the data. Defaults follow the 100-client,
// 10% participation, batch-20 baseline.
struct FederatedConfig {
  nn::ModelArch arch;
  int n_clients = 100;
  double participation = 0.10;
  int local_epochs = 1;
  int batch_size = 20;
  double eta = 0.05;
  int rounds_max = 100;
  std::optional<double> target_accuracy;
  std::uint64_t seed = 1;
  int eval_every = 1;
  strat::StrategyConfig strategy;
  PartitionSettings partition;

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  std::vector<int> participants;
  std::optional<double> test_accuracy;
  std::optional<double> test_loss;
  std::uint64_t bits_up = 0;
  std::uint64_t bits_down = 0;
  int uploads_skipped = 0;
};

struct RunResult {
  FederatedConfig config;
  std::vector<RoundRecord> records;  // record 0 is the pre-training evaluation
  std::optional<int> converged_at;
  double wall_time_s = 0.0;
};

// max(1, round(participation * n_clients)) distinct ids, uniform without
// replacement, seeded by (seed, round); ascending order.
std::vector<int> sample_clients(int n_clients, double participation,
                                std::uint64_t seed, int round);

// First recorded round whose test accuracy reaches the target.
std::optional<int> detect_convergence(std::span<const RoundRecord> records,
                                      double target_accuracy);

// The full federated loop: partition, init, rounds of broadcast / local
// training / aggregation, periodic evaluation, exact bit ledger. A pure
// function of (cfg, datasets).
RunResult run_federated(const FederatedConfig& cfg, const data::Dataset& train,
                        const data::Dataset& test);

}  // namespace fedsim::engine
