#include <benchmark/benchmark.h>

#include <numeric>

#include "fedsim/compression.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/strategies.hpp"

using namespace fedsim;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::vector<double> v(n);
  auto eng = rng::make_engine(seed, rng::Purpose::SynthNoise);
  for (double& x : v) x = 2.0 * rng::uniform01(eng) - 1.0;
  return v;
}

void BM_GradientMlp(benchmark::State& state) {
  nn::ModelArch arch{{784, 200, 10}};
  auto params = nn::init_model(arch, 1);
  data::Dataset d = data::synth_generate(10, 10, 784, 2);
  std::vector<std::uint32_t> idx(20);
  std::iota(idx.begin(), idx.end(), 0u);
  nn::Batch batch = nn::gather(d, idx);
  for (auto _ : state) {
    auto grad = nn::gradient(params, batch);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_GradientMlp);

void BM_TopkSparsify(benchmark::State& state) {
  auto vec = random_vec(159010, 3);
  compress::Residual residual{random_vec(159010, 4)};
  for (auto _ : state) {
    auto [update, next] = compress::topk_sparsify(vec, 0.01, residual);
    benchmark::DoNotOptimize(update.bits);
  }
}
BENCHMARK(BM_TopkSparsify);

void BM_StcEncode(benchmark::State& state) {
  auto vec = random_vec(159010, 5);
  compress::Residual residual{random_vec(159010, 6)};
  for (auto _ : state) {
    auto [update, next] = compress::stc_encode(vec, 0.01, residual);
    benchmark::DoNotOptimize(update.bits);
  }
}
BENCHMARK(BM_StcEncode);

void BM_SignCompress(benchmark::State& state) {
  auto vec = random_vec(159010, 7);
  for (auto _ : state) {
    auto update = compress::sign_compress(vec);
    benchmark::DoNotOptimize(update.bits);
  }
}
BENCHMARK(BM_SignCompress);

void BM_WeightedAverage10(benchmark::State& state) {
  std::vector<std::vector<double>> updates;
  std::vector<std::size_t> weights;
  for (int k = 0; k < 10; ++k) {
    updates.push_back(random_vec(159010, 10 + k));
    weights.push_back(600);
  }
  for (auto _ : state) {
    auto avg = strat::weighted_average(updates, weights);
    benchmark::DoNotOptimize(avg.data());
  }
}
BENCHMARK(BM_WeightedAverage10);

void BM_FedAvgRound(benchmark::State& state) {
  auto full = data::synth_generate(4, 50, 16, 9);
  auto [train, test] = data::split_holdout(full, 0.2);
  engine::FederatedConfig cfg;
  cfg.arch = nn::ModelArch{{16, 16, 4}};
  cfg.n_clients = 8;
  cfg.participation = 0.5;
  cfg.batch_size = 10;
  cfg.rounds_max = 1;
  cfg.eval_every = 2;  // skip the per-round evaluation
  for (auto _ : state) {
    auto result = engine::run_federated(cfg, train, test);
    benchmark::DoNotOptimize(result.records.data());
  }
}
BENCHMARK(BM_FedAvgRound);

}  // namespace
