#include "fedsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

#include "json.hpp"

namespace fedsim::data {

std::string to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::Iid: return "iid";
    case PartitionMode::SortedNonIid: return "sorted-noniid";
    case PartitionMode::SharedPoolRemainder: return "shared-pool-remainder";
  }
  return "iid";
}

PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "iid") return PartitionMode::Iid;
  if (s == "sorted-noniid") return PartitionMode::SortedNonIid;
  if (s == "shared-pool-remainder") return PartitionMode::SharedPoolRemainder;
  throw ConfigError("unknown partition mode: " + s);
}

void PartitionPlan::validate() const {
  std::unordered_set<std::uint32_t> seen;
  for (const auto& client : assignments) {
    if (client.empty()) throw PartitionError("partition plan has an empty client");
    for (std::uint32_t idx : client) {
      if (idx >= n_samples) throw PartitionError("partition index out of range");
      if (!seen.insert(idx).second)
        throw PartitionError("partition index assigned twice");
    }
  }
}

PartitionPlan partition_iid(const Dataset& d, int n_clients, std::uint64_t seed) {
  if (n_clients < 1) throw ConfigError("partition_iid: n_clients must be >= 1");
  const std::size_t n = d.size();
  if (n < static_cast<std::size_t>(n_clients))
    throw PartitionError("partition_iid: fewer samples than clients");

  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  auto eng = rng::make_engine(seed, rng::Purpose::Partition);
  rng::shuffle(perm, eng);

  PartitionPlan plan{PartitionMode::Iid, seed, n, {}};
  plan.assignments.resize(n_clients);
  const std::size_t base = n / static_cast<std::size_t>(n_clients);
  const std::size_t extra = n % static_cast<std::size_t>(n_clients);
  std::size_t cursor = 0;
  for (int c = 0; c < n_clients; ++c) {
    const std::size_t take = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
    plan.assignments[c].assign(perm.begin() + cursor, perm.begin() + cursor + take);
    cursor += take;
  }
  return plan;
}

PartitionPlan partition_noniid_sorted(const Dataset& d, int n_clients,
                                      int shards_per_client, std::uint64_t seed) {
  if (n_clients < 1 || shards_per_client < 1)
    throw ConfigError("partition_noniid_sorted: counts must be >= 1");
  const std::size_t n = d.size();
  const std::size_t total_shards =
      static_cast<std::size_t>(n_clients) * static_cast<std::size_t>(shards_per_client);
  if (n < total_shards)
    throw PartitionError("partition_noniid_sorted: fewer samples than shards");

  // Stable sort by label keeps the original order inside each class.
  std::vector<std::uint32_t> sorted(n);
  std::iota(sorted.begin(), sorted.end(), 0u);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return d.labels[a] < d.labels[b];
                   });

  // Contiguous shards, sizes differing by at most one.
  const std::size_t base = n / total_shards;
  const std::size_t extra = n % total_shards;
  std::vector<std::pair<std::size_t, std::size_t>> shard_bounds(total_shards);
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < total_shards; ++s) {
    const std::size_t take = base + (s < extra ? 1 : 0);
    shard_bounds[s] = {cursor, cursor + take};
    cursor += take;
  }

  std::vector<std::uint32_t> shard_order(total_shards);
  std::iota(shard_order.begin(), shard_order.end(), 0u);
  auto eng = rng::make_engine(seed, rng::Purpose::Partition);
  rng::shuffle(shard_order, eng);

  PartitionPlan plan{PartitionMode::SortedNonIid, seed, n, {}};
  plan.assignments.resize(n_clients);
  std::size_t next = 0;
  for (int c = 0; c < n_clients; ++c) {
    auto& mine = plan.assignments[c];
    for (int s = 0; s < shards_per_client; ++s) {
      const auto [lo, hi] = shard_bounds[shard_order[next++]];
      mine.insert(mine.end(), sorted.begin() + lo, sorted.begin() + hi);
    }
  }
  return plan;
}

SharedPoolSplit extract_shared_pool(const Dataset& d, const SharedPoolConfig& cfg,
                                    std::uint64_t seed) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
    throw ConfigError("shared pool: gamma must be in (0,1)");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
    throw ConfigError("shared pool: alpha must be in [0,1]");
  const double target = cfg.gamma * static_cast<double>(d.size());
  if (target < static_cast<double>(d.class_count))
    throw PartitionError("shared pool: gamma*n smaller than class count");

  std::vector<std::vector<std::uint32_t>> by_class(d.class_count);
  for (std::size_t i = 0; i < d.size(); ++i)
    by_class[static_cast<std::size_t>(d.labels[i])].push_back(
        static_cast<std::uint32_t>(i));

  auto eng = rng::make_engine(seed, rng::Purpose::PoolDraw);
  std::vector<std::uint32_t> pool_idx;
  for (auto& members : by_class) {
    const std::size_t take = static_cast<std::size_t>(
        std::llround(cfg.gamma * static_cast<double>(members.size())));
    auto picks = rng::sample_without_replacement(members.size(), take, eng);
    for (std::uint32_t p : picks) pool_idx.push_back(members[p]);
  }
  std::sort(pool_idx.begin(), pool_idx.end());

  std::vector<std::uint32_t> rem_idx;
  rem_idx.reserve(d.size() - pool_idx.size());
  std::size_t p = 0;
  for (std::uint32_t i = 0; i < d.size(); ++i) {
    if (p < pool_idx.size() && pool_idx[p] == i) {
      ++p;
    } else {
      rem_idx.push_back(i);
    }
  }

  SharedPoolSplit split;
  split.pool = subset(d, pool_idx);
  split.remainder = subset(d, rem_idx);
  split.pool_indices = std::move(pool_idx);
  split.remainder_indices = std::move(rem_idx);
  return split;
}

std::string export_plan(const PartitionPlan& plan) {
  nlohmann::json j;
  j["mode"] = to_string(plan.mode);
  j["seed"] = plan.seed;
  j["n_samples"] = plan.n_samples;
  nlohmann::json clients = nlohmann::json::array();
  for (const auto& a : plan.assignments) clients.push_back(a);
  j["assignments"] = std::move(clients);
  return j.dump(2) + "\n";
}

PartitionPlan import_plan(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("plan parse error: ") + e.what());
  }
  PartitionPlan plan;
  try {
    plan.mode = partition_mode_from_string(j.at("mode").get<std::string>());
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.n_samples = j.at("n_samples").get<std::size_t>();
    for (const auto& client : j.at("assignments"))
      plan.assignments.push_back(client.get<std::vector<std::uint32_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("plan field error: ") + e.what());
  }
  plan.validate();
  return plan;
}

}  // namespace fedsim::data
