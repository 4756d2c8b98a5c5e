#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"

namespace fedsim::data {

enum class PartitionMode { Iid, SortedNonIid, SharedPoolRemainder };

std::string to_string(PartitionMode mode);
PartitionMode partition_mode_from_string(const std::string& s);

// Disjoint per-client sample-index lists over one dataset.
struct PartitionPlan {
  PartitionMode mode = PartitionMode::Iid;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;  // index domain of the partitioned dataset
  std::vector<std::vector<std::uint32_t>> assignments;

  // Disjointness, in-range indices, no empty client.
  void validate() const;
};

// Shuffle then contiguous equal splits; the first n mod n_clients clients
// take one extra sample.
PartitionPlan partition_iid(const Dataset& d, int n_clients, std::uint64_t seed);

// Stable-sort indices by label, cut into n_clients*shards_per_client
// contiguous shards (sizes differ by at most one), hand each client
// shards_per_client random shards without replacement.
PartitionPlan partition_noniid_sorted(const Dataset& d, int n_clients,
                                      int shards_per_client, std::uint64_t seed);

struct SharedPoolConfig {
  double gamma = 0.1;  // fraction of the data placed in the shared pool
  double alpha = 1.0;  // fraction of the pool replicated to each client
};

struct SharedPoolSplit {
  Dataset pool;
  Dataset remainder;
  std::vector<std::uint32_t> pool_indices;       // rows of the source dataset
  std::vector<std::uint32_t> remainder_indices;  // complement, ascending
};

// Stratified-by-label random gamma fraction into the pool; the rest is the
// remainder. PartitionError when gamma*n < class_count.
SharedPoolSplit extract_shared_pool(const Dataset& d, const SharedPoolConfig& cfg,
                                    std::uint64_t seed);

// JSON replay document: {"mode", "seed", "n_samples", "assignments"}.
std::string export_plan(const PartitionPlan& plan);
PartitionPlan import_plan(const std::string& text);

}  // namespace fedsim::data
