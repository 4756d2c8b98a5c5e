#include "doctest.h"

#include <numeric>
#include <set>

#include "fedsim/errors.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

// Balanced labeled dataset with trivial one-dimensional features; partition
// code only looks at labels and row count.
data::Dataset labeled(const std::vector<int>& labels, int classes) {
  data::Dataset d;
  d.class_count = classes;
  d.features = Matrix(labels.size(), 1);
  d.labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i)
    d.features(i, 0) = static_cast<double>(i) / (labels.size() + 1.0);
  return d;
}

data::Dataset balanced(int classes, int per_class) {
  std::vector<int> labels;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) labels.push_back(c);
  return labeled(labels, classes);
}

void check_exact_partition(const data::PartitionPlan& plan, std::size_t n) {
  std::set<std::uint32_t> seen;
  for (const auto& client : plan.assignments) {
    CHECK(!client.empty());
    for (std::uint32_t idx : client) {
      CHECK(idx < n);
      CHECK(seen.insert(idx).second);
    }
  }
  CHECK(seen.size() == n);
}

std::size_t distinct_labels(const data::Dataset& d,
                            const std::vector<std::uint32_t>& idx) {
  std::set<int> labels;
  for (std::uint32_t i : idx) labels.insert(d.labels[i]);
  return labels.size();
}

}  // namespace

TEST_CASE("iid partition: equal splits with the remainder spread forward") {
  data::Dataset d = balanced(2, 5);  // n = 10
  auto plan = data::partition_iid(d, 3, 1);
  CHECK(plan.assignments[0].size() == 4);
  CHECK(plan.assignments[1].size() == 3);
  CHECK(plan.assignments[2].size() == 3);
  check_exact_partition(plan, 10);

  data::Dataset big = balanced(10, 6000);  // n = 60000
  auto bp = data::partition_iid(big, 100, 3);
  for (const auto& c : bp.assignments) CHECK(c.size() == 600);

  CHECK_THROWS_AS(data::partition_iid(d, 11, 1), PartitionError);
}

TEST_CASE("iid partition is reproducible per seed") {
  data::Dataset d = balanced(4, 25);
  auto a = data::partition_iid(d, 7, 5);
  auto b = data::partition_iid(d, 7, 5);
  CHECK(a.assignments == b.assignments);
  auto c = data::partition_iid(d, 7, 6);
  CHECK(a.assignments != c.assignments);
}

TEST_CASE("sorted non-iid: shard counts and label concentration") {
  // 10 classes x 6000, 100 clients x 2 shards: shard size 300 divides the
  // class size, so every client sees at most 2 labels.
  data::Dataset d = balanced(10, 6000);
  auto plan = data::partition_noniid_sorted(d, 100, 2, 11);
  check_exact_partition(plan, d.size());
  for (const auto& client : plan.assignments) {
    CHECK(client.size() == 600);
    CHECK(distinct_labels(d, client) <= 2);
  }
}

TEST_CASE("sorted non-iid: one shard per client") {
  data::Dataset d = balanced(10, 100);
  auto plan = data::partition_noniid_sorted(d, 10, 1, 13);
  check_exact_partition(plan, d.size());
  for (const auto& client : plan.assignments)
    CHECK(distinct_labels(d, client) <= 2);
}

TEST_CASE("sorted non-iid: boundary shard can reach shards_per_client + 1") {
  // Two classes of 6 and 4: shards of 5 and 5, the second one straddles the
  // label boundary.
  data::Dataset d = labeled({0, 0, 0, 0, 0, 0, 1, 1, 1, 1}, 2);
  auto plan = data::partition_noniid_sorted(d, 2, 1, 17);
  check_exact_partition(plan, 10);
  std::size_t worst = 0;
  for (const auto& client : plan.assignments)
    worst = std::max(worst, distinct_labels(d, client));
  CHECK(worst == 2);  // = shards_per_client + 1

  CHECK_THROWS_AS(data::partition_noniid_sorted(d, 6, 2, 1), PartitionError);
}

TEST_CASE("sorted non-iid: every client gets exactly shards_per_client shards") {
  data::Dataset d = balanced(5, 40);
  auto plan = data::partition_noniid_sorted(d, 10, 4, 23);
  // 40 shards of size 5: each client holds 4 shards = 20 samples.
  for (const auto& client : plan.assignments) CHECK(client.size() == 20);
  check_exact_partition(plan, d.size());
}

TEST_CASE("randomized partition properties (1000 cases)") {
  // Cases are built so the shard size divides the class size, the regime the
  // label-count bound is stated for; disjointness and coverage hold always.
  auto eng = rng::make_engine(2024, rng::Purpose::Partition);
  int executed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int clients = 1 + static_cast<int>(rng::uniform_below(eng, 16));
    const int spc = 1 + static_cast<int>(rng::uniform_below(eng, 4));
    const std::size_t total_shards =
        static_cast<std::size_t>(clients) * static_cast<std::size_t>(spc);
    // classes must divide the shard count to keep shards label-pure
    std::vector<int> divisors;
    for (int c = 2; c <= static_cast<int>(total_shards); ++c)
      if (total_shards % static_cast<std::size_t>(c) == 0) divisors.push_back(c);
    if (divisors.empty()) divisors.push_back(static_cast<int>(total_shards));
    const int classes =
        divisors[rng::uniform_below(eng, divisors.size())];
    if (total_shards % static_cast<std::size_t>(classes) != 0) continue;
    const int shard_size = 1 + static_cast<int>(rng::uniform_below(eng, 12));
    const int shards_per_class = static_cast<int>(total_shards) / classes;
    const int per_class = shards_per_class * shard_size;
    const std::uint64_t seed = eng();

    data::Dataset d = balanced(classes, per_class);
    auto plan = data::partition_noniid_sorted(d, clients, spc, seed);
    ++executed;

    std::set<std::uint32_t> seen;
    for (const auto& client : plan.assignments) {
      REQUIRE(!client.empty());
      for (std::uint32_t idx : client) {
        REQUIRE(idx < d.size());
        REQUIRE(seen.insert(idx).second);
      }
      REQUIRE(distinct_labels(d, client) <=
              static_cast<std::size_t>(spc) + 1);
    }
    REQUIRE(seen.size() == d.size());
  }
  CHECK(executed >= 900);  // nearly all draws are usable
}

TEST_CASE("shared pool extraction is stratified and exact") {
  data::Dataset d = balanced(10, 60);  // n = 600
  data::SharedPoolConfig cfg{0.1, 1.0};
  auto split = data::extract_shared_pool(d, cfg, 3);
  CHECK(split.pool.size() == 60);
  CHECK(split.remainder.size() == 540);
  std::vector<int> counts(10, 0);
  for (int y : split.pool.labels) ++counts[static_cast<std::size_t>(y)];
  for (int c : counts) CHECK(c == 6);

  // pool and remainder indices tile the dataset
  std::set<std::uint32_t> seen(split.pool_indices.begin(),
                               split.pool_indices.end());
  for (auto i : split.remainder_indices) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 600);

  data::SharedPoolConfig half{0.5, 0.0};
  auto even = data::extract_shared_pool(d, half, 3);
  CHECK(even.pool.size() == 300);
  CHECK(even.remainder.size() == 300);
}

TEST_CASE("shared pool histogram stays within one sample of proportional") {
  std::vector<int> labels;
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 40 + 7 * c; ++i) labels.push_back(c);
  data::Dataset d = labeled(labels, 5);
  data::SharedPoolConfig cfg{0.2, 0.5};
  auto split = data::extract_shared_pool(d, cfg, 9);
  std::vector<int> counts(5, 0);
  for (int y : split.pool.labels) ++counts[static_cast<std::size_t>(y)];
  for (int c = 0; c < 5; ++c) {
    const double expected = 0.2 * (40 + 7 * c);
    CHECK(std::fabs(counts[static_cast<std::size_t>(c)] - expected) <= 1.0);
  }
}

TEST_CASE("shared pool rejects degenerate settings") {
  data::Dataset d = balanced(10, 2);  // n = 20
  CHECK_THROWS_AS(
      data::extract_shared_pool(d, data::SharedPoolConfig{0.1, 1.0}, 1),
      PartitionError);  // gamma*n = 2 < 10 classes
  CHECK_THROWS_AS(
      data::extract_shared_pool(d, data::SharedPoolConfig{0.0, 1.0}, 1),
      ConfigError);
  CHECK_THROWS_AS(
      data::extract_shared_pool(d, data::SharedPoolConfig{0.5, 1.5}, 1),
      ConfigError);
}

TEST_CASE("plan export/import round-trips and validates") {
  data::Dataset d = balanced(3, 10);
  auto plan = data::partition_iid(d, 4, 77);
  const std::string doc = data::export_plan(plan);
  auto back = data::import_plan(doc);
  CHECK(back.mode == plan.mode);
  CHECK(back.seed == plan.seed);
  CHECK(back.n_samples == plan.n_samples);
  CHECK(back.assignments == plan.assignments);

  CHECK_THROWS_AS(data::import_plan("not json"), FormatError);
  CHECK_THROWS_AS(data::import_plan("{}"), FormatError);

  // duplicated index must fail validation
  auto corrupt = plan;
  corrupt.assignments[0][0] = corrupt.assignments[1][0];
  CHECK_THROWS_AS(data::import_plan(data::export_plan(corrupt)), PartitionError);
}
