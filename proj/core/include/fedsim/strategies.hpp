#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/compression.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/nn.hpp"

namespace fedsim::strat {

enum class StrategyKind { FedAvg, SignSgd, Stc, Cmfl, FedMmd, FedDropout, DataShare };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& s);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::FedAvg;
  double k_frac = 0.01;             // stc
  double cmfl_threshold = 0.8;      // cmfl
  double mmd_lambda = 0.1;          // fedmmd
  std::optional<double> mmd_bandwidth;  // fedmmd; nullopt = median heuristic
  double dropout_rate = 0.25;       // feddropout
  int warmstart_epochs = 1;         // datashare
  double alpha = 1.0;               // datashare: pool fraction copied per client
  bool signsgd_compress_down = false;

  void validate() const;
};

// Per-client simulation state. The residual accumulator belongs to exactly
// one client and is only touched between that client's rounds.
struct ClientState {
  int id = 0;
  std::vector<std::uint32_t> samples;  // indices into the training dataset
  compress::Residual residual;

  std::size_t weight() const { return samples.size(); }  // m_k of Eq-style averaging
};

struct RoundContext {
  int round = 0;  // 1-based training round
  const data::Dataset* train = nullptr;
  int local_epochs = 1;
  int batch_size = 20;
  double eta = 0.05;
  std::uint64_t master_seed = 0;
};

struct BroadcastMsg {
  compress::Update payload;
  std::optional<compress::MaskSet> masks;  // feddropout
  std::uint64_t bits_per_client = 0;
};

struct Upload {
  int client_id = 0;
  std::size_t weight = 0;
  compress::Update payload;
};

// Sum_k (m_k/m) * u_k with m = sum of weights, accumulated in list order
// (callers pass uploads sorted by client id).
std::vector<double> weighted_average(const std::vector<std::vector<double>>& updates,
                                     const std::vector<std::size_t>& weights);

// Fraction of coordinates whose signs agree, sign(0) = +1.
double cmfl_relevance(std::span<const double> local_delta,
                      std::span<const double> global_delta);

// Squared maximum mean discrepancy with Gaussian kernel
// k(x,y) = exp(-|x-y|^2 / (2 sigma^2)).
double mmd_squared(const Matrix& a, const Matrix& b, double sigma);

// Median pairwise distance over the union of both sample sets (falls back
// to 1.0 when the median is zero).
double median_bandwidth(const Matrix& a, const Matrix& b);

// MMD^2 between local and reference feature sets, with the bandwidth either
// fixed or resolved by the median heuristic. The training loss adds this
// scaled by lambda.
double fedmmd_objective_term(const Matrix& features_local,
                             const Matrix& features_global,
                             std::optional<double> fixed_bandwidth);

// d(MMD^2)/d(features_local), same shape as features_local. sigma is treated
// as a constant.
Matrix mmd_gradient(const Matrix& features_local, const Matrix& features_global,
                    double sigma);

// The strategy contract: produce the broadcast, run one client's update,
// fold the uploads into the next global model.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual StrategyKind kind() const = 0;

  // Called once before round 1; datashare warm-starts the global model here.
  virtual void prepare(nn::ModelParams& /*global*/, const data::Dataset& /*train*/,
                       std::span<const std::uint32_t> /*pool_indices*/,
                       const RoundContext& /*ctx*/) {}

  virtual BroadcastMsg broadcast(const nn::ModelParams& global,
                                 const RoundContext& ctx) = 0;

  // nullopt = the client skipped this round (CMFL suppression, empty data).
  virtual std::optional<Upload> client_update(const BroadcastMsg& bc,
                                              ClientState& state,
                                              const RoundContext& ctx) = 0;

  virtual nn::ModelParams aggregate(const nn::ModelParams& global,
                                    const std::vector<Upload>& uploads,
                                    const RoundContext& ctx) = 0;
};

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg,
                                        const nn::ModelArch& arch);

}  // namespace fedsim::strat
