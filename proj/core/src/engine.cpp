#include "fedsim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::engine {

void FederatedConfig::validate() const {
  arch.validate();
  if (n_clients < 1) throw ConfigError("n_clients must be >= 1");
  if (!(participation > 0.0) || participation > 1.0)
    throw ConfigError("participation must be in (0,1]");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (rounds_max < 0) throw ConfigError("rounds_max must be >= 0");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (target_accuracy && !(*target_accuracy > 0.0))
    throw ConfigError("target_accuracy must be positive");
  if (partition.shards_per_client < 1)
    throw ConfigError("shards_per_client must be >= 1");
  strategy.validate();
}

std::vector<int> sample_clients(int n_clients, double participation,
                                std::uint64_t seed, int round) {
  const auto m = std::max<std::int64_t>(
      1, std::llround(participation * static_cast<double>(n_clients)));
  auto eng = rng::make_engine(seed, rng::Purpose::ClientSampling,
                              static_cast<std::uint64_t>(round));
  auto picks = rng::sample_without_replacement(
      static_cast<std::uint64_t>(n_clients), static_cast<std::uint64_t>(m), eng);
  std::vector<int> ids(picks.begin(), picks.end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::optional<int> detect_convergence(std::span<const RoundRecord> records,
                                      double target_accuracy) {
  for (const RoundRecord& r : records)
    if (r.test_accuracy && *r.test_accuracy >= target_accuracy) return r.round;
  return std::nullopt;
}

namespace {

data::PartitionPlan build_plan(const FederatedConfig& cfg,
                               const data::Dataset& d) {
  switch (cfg.partition.mode) {
    case data::PartitionMode::Iid:
      return data::partition_iid(d, cfg.n_clients, cfg.seed);
    case data::PartitionMode::SortedNonIid:
    case data::PartitionMode::SharedPoolRemainder:
      return data::partition_noniid_sorted(d, cfg.n_clients,
                                           cfg.partition.shards_per_client,
                                           cfg.seed);
  }
  throw ConfigError("unknown partition mode");
}

}  // namespace

RunResult run_federated(const FederatedConfig& cfg, const data::Dataset& train,
                        const data::Dataset& test) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  train.validate();
  test.validate();
  if (train.dim() != cfg.arch.input_dim())
    throw ShapeError("training dimension does not match model input");
  if (static_cast<std::size_t>(train.class_count) > cfg.arch.class_count())
    throw ShapeError("more classes than model outputs");

  const bool datashare = cfg.strategy.kind == strat::StrategyKind::DataShare;

  // Assemble the per-client index lists. Datashare extracts the shared pool
  // first, partitions the remainder, and appends each client's pool draw.
  data::Dataset working;
  std::vector<std::uint32_t> pool_indices;  // rows of `working`
  data::PartitionPlan plan;
  if (datashare) {
    data::SharedPoolConfig pool_cfg{cfg.partition.pool_gamma, cfg.strategy.alpha};
    auto split = data::extract_shared_pool(train, pool_cfg, cfg.seed);
    plan = build_plan(cfg, split.remainder);
    plan.mode = data::PartitionMode::SharedPoolRemainder;
    const auto n_rem = static_cast<std::uint32_t>(split.remainder.size());
    working = data::concat(split.remainder, split.pool);
    pool_indices.resize(split.pool.size());
    for (std::size_t i = 0; i < pool_indices.size(); ++i)
      pool_indices[i] = n_rem + static_cast<std::uint32_t>(i);
  } else {
    working = train;
    plan = build_plan(cfg, working);
  }

  std::vector<strat::ClientState> states(cfg.n_clients);
  for (int c = 0; c < cfg.n_clients; ++c) {
    states[c].id = c;
    states[c].samples = plan.assignments[c];
    if (datashare && !pool_indices.empty() && cfg.strategy.alpha > 0.0) {
      const auto take = static_cast<std::uint64_t>(std::llround(
          cfg.strategy.alpha * static_cast<double>(pool_indices.size())));
      auto eng = rng::make_engine(cfg.seed, rng::Purpose::PoolAugment,
                                  static_cast<std::uint64_t>(c));
      auto picks =
          rng::sample_without_replacement(pool_indices.size(), take, eng);
      std::sort(picks.begin(), picks.end());
      for (std::uint32_t p : picks)
        states[c].samples.push_back(pool_indices[p]);
    }
  }

  auto strategy = strat::make_strategy(cfg.strategy, cfg.arch);
  nn::ModelParams global = nn::init_model(cfg.arch, cfg.seed);

  strat::RoundContext ctx;
  ctx.train = &working;
  ctx.local_epochs = cfg.local_epochs;
  ctx.batch_size = cfg.batch_size;
  ctx.eta = cfg.eta;
  ctx.master_seed = cfg.seed;
  ctx.round = 0;

  strategy->prepare(global, working, pool_indices, ctx);

  RunResult result;
  result.config = cfg;

  {
    RoundRecord r0;
    r0.round = 0;
    auto eval = nn::evaluate(global, test);
    r0.test_accuracy = eval.accuracy;
    r0.test_loss = eval.loss;
    result.records.push_back(std::move(r0));
  }

  const bool done_at_start =
      cfg.target_accuracy &&
      *result.records.front().test_accuracy >= *cfg.target_accuracy;

  for (int round = 1; round <= cfg.rounds_max && !done_at_start; ++round) {
    ctx.round = round;
    RoundRecord rec;
    rec.round = round;
    rec.participants =
        sample_clients(cfg.n_clients, cfg.participation, cfg.seed, round);

    strat::BroadcastMsg bc;
    std::vector<strat::Upload> uploads;
    try {
      bc = strategy->broadcast(global, ctx);
      for (int id : rec.participants) {
        auto up = strategy->client_update(bc, states[id], ctx);
        if (up) {
          rec.bits_up += up->payload.bits;
          uploads.push_back(std::move(*up));
        } else {
          ++rec.uploads_skipped;
        }
      }
      global = strategy->aggregate(global, uploads, ctx);
    } catch (const Error& e) {
      throw Error("round " + std::to_string(round) + ": " + e.what());
    }
    rec.bits_down =
        bc.bits_per_client * static_cast<std::uint64_t>(rec.participants.size());

    if (round % cfg.eval_every == 0 || round == cfg.rounds_max) {
      auto eval = nn::evaluate(global, test);
      rec.test_accuracy = eval.accuracy;
      rec.test_loss = eval.loss;
    }
    const bool reached = cfg.target_accuracy && rec.test_accuracy &&
                         *rec.test_accuracy >= *cfg.target_accuracy;
    result.records.push_back(std::move(rec));
    if (reached) break;
  }

  if (cfg.target_accuracy)
    result.converged_at = detect_convergence(result.records, *cfg.target_accuracy);

  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace fedsim::engine
