#include "fedsim/strategies.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::strat {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::FedAvg: return "fedavg";
    case StrategyKind::SignSgd: return "signsgd";
    case StrategyKind::Stc: return "stc";
    case StrategyKind::Cmfl: return "cmfl";
    case StrategyKind::FedMmd: return "fedmmd";
    case StrategyKind::FedDropout: return "feddropout";
    case StrategyKind::DataShare: return "datashare";
  }
  return "fedavg";
}

StrategyKind strategy_kind_from_string(const std::string& s) {
  if (s == "fedavg") return StrategyKind::FedAvg;
  if (s == "signsgd") return StrategyKind::SignSgd;
  if (s == "stc") return StrategyKind::Stc;
  if (s == "cmfl") return StrategyKind::Cmfl;
  if (s == "fedmmd") return StrategyKind::FedMmd;
  if (s == "feddropout") return StrategyKind::FedDropout;
  if (s == "datashare") return StrategyKind::DataShare;
  throw ConfigError("unknown strategy kind: " + s);
}

void StrategyConfig::validate() const {
  if (!(k_frac > 0.0) || k_frac > 1.0)
    throw ConfigError("strategy.k_frac must be in (0,1]");
  if (cmfl_threshold < 0.0 || cmfl_threshold > 1.0)
    throw ConfigError("strategy.cmfl_threshold must be in [0,1]");
  if (mmd_lambda < 0.0) throw ConfigError("strategy.mmd_lambda must be >= 0");
  if (mmd_bandwidth && !(*mmd_bandwidth > 0.0))
    throw ConfigError("strategy.mmd_bandwidth must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("strategy.dropout_rate must be in [0,1)");
  if (warmstart_epochs < 1)
    throw ConfigError("strategy.warmstart_epochs must be >= 1");
  if (alpha < 0.0 || alpha > 1.0)
    throw ConfigError("strategy.alpha must be in [0,1]");
}

std::vector<double> weighted_average(const std::vector<std::vector<double>>& updates,
                                     const std::vector<std::size_t>& weights) {
  if (updates.empty()) throw Error("weighted_average: no updates to aggregate");
  if (updates.size() != weights.size())
    throw ShapeError("weighted_average: update/weight counts differ");
  const std::size_t dim = updates.front().size();
  std::size_t m = 0;
  for (std::size_t w : weights) {
    if (w == 0) throw Error("weighted_average: zero weight");
    m += w;
  }
  std::vector<double> acc(dim, 0.0);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    if (updates[k].size() != dim)
      throw ShapeError("weighted_average: dimension mismatch");
    const double w = static_cast<double>(weights[k]) / static_cast<double>(m);
    const double* u = updates[k].data();
    for (std::size_t i = 0; i < dim; ++i) acc[i] += w * u[i];
  }
  return acc;
}

double cmfl_relevance(std::span<const double> local_delta,
                      std::span<const double> global_delta) {
  if (local_delta.size() != global_delta.size())
    throw ShapeError("cmfl_relevance: dimension mismatch");
  if (local_delta.empty()) throw ShapeError("cmfl_relevance: empty vectors");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < local_delta.size(); ++i)
    if (compress::sign_of(local_delta[i]) == compress::sign_of(global_delta[i]))
      ++agree;
  return static_cast<double>(agree) / static_cast<double>(local_delta.size());
}

namespace {

double sq_distance(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

double mmd_squared(const Matrix& a, const Matrix& b, double sigma) {
  if (a.cols != b.cols) throw ShapeError("mmd: feature dimensions differ");
  if (a.rows == 0 || b.rows == 0) throw Error("mmd: empty feature set");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  auto mean_kernel = [&](const Matrix& x, const Matrix& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < y.rows; ++j)
        acc += std::exp(-sq_distance(x.row(i), y.row(j), x.cols) * inv);
    return acc / (static_cast<double>(x.rows) * static_cast<double>(y.rows));
  };
  return mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
}

double median_bandwidth(const Matrix& a, const Matrix& b) {
  std::vector<const double*> rows;
  rows.reserve(a.rows + b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) rows.push_back(a.row(i));
  for (std::size_t i = 0; i < b.rows; ++i) rows.push_back(b.row(i));
  std::vector<double> dists;
  dists.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      dists.push_back(std::sqrt(sq_distance(rows[i], rows[j], a.cols)));
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  const std::size_t n = dists.size();
  const double med = n % 2 == 1 ? dists[n / 2]
                                : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
  return med > 0.0 ? med : 1.0;
}

double fedmmd_objective_term(const Matrix& features_local,
                             const Matrix& features_global,
                             std::optional<double> fixed_bandwidth) {
  const double sigma = fixed_bandwidth
                           ? *fixed_bandwidth
                           : median_bandwidth(features_local, features_global);
  return mmd_squared(features_local, features_global, sigma);
}

Matrix mmd_gradient(const Matrix& x, const Matrix& y, double sigma) {
  if (x.cols != y.cols) throw ShapeError("mmd_gradient: feature dims differ");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const double n = static_cast<double>(x.rows);
  const double m = static_cast<double>(y.rows);
  Matrix grad(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double* grow = grad.row(i);
    const double* xi = x.row(i);
    // within-set term: -2/(n^2 sigma^2) sum_j k(xi,xj)(xi-xj)
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (j == i) continue;
      const double* xj = x.row(j);
      const double kij = std::exp(-sq_distance(xi, xj, x.cols) * inv);
      const double c = -2.0 / (n * n * sigma * sigma) * kij;
      for (std::size_t d = 0; d < x.cols; ++d) grow[d] += c * (xi[d] - xj[d]);
    }
    // cross term: +2/(n m sigma^2) sum_j k(xi,yj)(xi-yj)
    for (std::size_t j = 0; j < y.rows; ++j) {
      const double* yj = y.row(j);
      const double kij = std::exp(-sq_distance(xi, yj, x.cols) * inv);
      const double c = 2.0 / (n * m * sigma * sigma) * kij;
      for (std::size_t d = 0; d < x.cols; ++d) grow[d] += c * (xi[d] - yj[d]);
    }
  }
  return grad;
}

namespace {

std::vector<double> decode_model(const BroadcastMsg& bc) {
  return compress::decode(bc.payload, bc.payload.dim);
}

// Uploads arrive in sampling order; aggregation runs in ascending client id.
std::vector<const Upload*> sorted_by_id(const std::vector<Upload>& uploads) {
  std::vector<const Upload*> out;
  out.reserve(uploads.size());
  for (const Upload& u : uploads) out.push_back(&u);
  std::sort(out.begin(), out.end(),
            [](const Upload* a, const Upload* b) { return a->client_id < b->client_id; });
  return out;
}

nn::ModelParams average_dense_params(const nn::ModelArch& arch,
                                     const std::vector<Upload>& uploads,
                                     const char* who) {
  if (uploads.empty()) throw Error(std::string(who) + ": no uploads in round");
  auto order = sorted_by_id(uploads);
  std::vector<std::vector<double>> vecs;
  std::vector<std::size_t> weights;
  vecs.reserve(order.size());
  for (const Upload* u : order) {
    vecs.push_back(compress::decode(u->payload, u->payload.dim));
    weights.push_back(u->weight);
  }
  return nn::ModelParams{arch, weighted_average(vecs, weights)};
}

class FedAvgStrategy : public Strategy {
 public:
  explicit FedAvgStrategy(const StrategyConfig& cfg, const nn::ModelArch& arch)
      : cfg_(cfg), arch_(arch) {}

  StrategyKind kind() const override { return StrategyKind::FedAvg; }

  BroadcastMsg broadcast(const nn::ModelParams& global,
                         const RoundContext&) override {
    BroadcastMsg bc;
    bc.payload = compress::make_dense(global.values);
    bc.bits_per_client = bc.payload.bits;
    return bc;
  }

  std::optional<Upload> client_update(const BroadcastMsg& bc, ClientState& state,
                                      const RoundContext& ctx) override {
    nn::ModelParams model{arch_, decode_model(bc)};
    auto trained = nn::local_train(
        model, *ctx.train, state.samples, ctx.local_epochs, ctx.batch_size,
        ctx.eta,
        rng::derive(ctx.master_seed, rng::Purpose::ClientShuffle,
                    static_cast<std::uint64_t>(ctx.round),
                    static_cast<std::uint64_t>(state.id)));
    if (!trained) return std::nullopt;
    return Upload{state.id, state.weight(),
                  compress::make_dense(std::move(trained->values))};
  }

  nn::ModelParams aggregate(const nn::ModelParams&,
                            const std::vector<Upload>& uploads,
                            const RoundContext&) override {
    return average_dense_params(arch_, uploads, "fedavg");
  }

 protected:
  StrategyConfig cfg_;
  nn::ModelArch arch_;
};

// FedAvg plus a warm-start on the shared pool; the per-client pool
// augmentation happens when the engine builds client states.
class DataShareStrategy final : public FedAvgStrategy {
 public:
  using FedAvgStrategy::FedAvgStrategy;

  StrategyKind kind() const override { return StrategyKind::DataShare; }

  void prepare(nn::ModelParams& global, const data::Dataset& train,
               std::span<const std::uint32_t> pool_indices,
               const RoundContext& ctx) override {
    if (pool_indices.empty())
      throw ConfigError("datashare: shared pool is empty");
    auto warmed = nn::local_train(
        global, train, pool_indices, cfg_.warmstart_epochs, ctx.batch_size,
        ctx.eta, rng::derive(ctx.master_seed, rng::Purpose::Warmstart));
    global = std::move(*warmed);
  }
};

class SignSgdStrategy final : public Strategy {
 public:
  SignSgdStrategy(const StrategyConfig& cfg, const nn::ModelArch& arch)
      : cfg_(cfg), arch_(arch) {}

  StrategyKind kind() const override { return StrategyKind::SignSgd; }

  BroadcastMsg broadcast(const nn::ModelParams& global,
                         const RoundContext& ctx) override {
    BroadcastMsg bc;
    bc.payload = compress::make_dense(global.values);
    // With downstream compression on, the wire carries the sign of the
    // server step; it reconstructs the model exactly because the step is
    // +-eta per coordinate, so only the accounting changes.
    bc.bits_per_client =
        cfg_.signsgd_compress_down && ctx.round > 1
            ? static_cast<std::uint64_t>(global.values.size()) + 64
            : bc.payload.bits;
    return bc;
  }

  std::optional<Upload> client_update(const BroadcastMsg& bc, ClientState& state,
                                      const RoundContext& ctx) override {
    if (state.samples.empty()) return std::nullopt;
    nn::ModelParams model{arch_, decode_model(bc)};
    auto eng = rng::make_engine(ctx.master_seed, rng::Purpose::SignBatch,
                                static_cast<std::uint64_t>(ctx.round),
                                static_cast<std::uint64_t>(state.id));
    const std::size_t take =
        std::min<std::size_t>(state.samples.size(),
                              static_cast<std::size_t>(ctx.batch_size));
    auto picks = rng::sample_without_replacement(state.samples.size(), take, eng);
    std::vector<std::uint32_t> batch_idx(take);
    for (std::size_t i = 0; i < take; ++i)
      batch_idx[i] = state.samples[picks[i]];
    nn::GradVector g = nn::gradient(model, nn::gather(*ctx.train, batch_idx));
    return Upload{state.id, state.weight(), compress::sign_compress(g)};
  }

  nn::ModelParams aggregate(const nn::ModelParams& global,
                            const std::vector<Upload>& uploads,
                            const RoundContext& ctx) override {
    if (uploads.empty()) throw Error("signsgd: no uploads in round");
    auto order = sorted_by_id(uploads);
    std::vector<std::vector<std::int8_t>> signs;
    signs.reserve(order.size());
    for (const Upload* u : order)
      signs.push_back(std::get<compress::SignPayload>(u->payload.payload).signs);
    auto votes = compress::majority_aggregate(signs);
    nn::ModelParams out = global;
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] -= ctx.eta * static_cast<double>(votes[i]);
    return out;
  }

 private:
  StrategyConfig cfg_;
  nn::ModelArch arch_;
};

// The engine-visible model is the replica every participant can reconstruct
// from the compressed downstream stream. k_frac = 1 bypasses the ternary
// codec entirely (mean-magnitude ternarization is not the identity even at
// full density), which realizes the lossless limit.
class StcStrategy final : public Strategy {
 public:
  StcStrategy(const StrategyConfig& cfg, const nn::ModelArch& arch)
      : cfg_(cfg), arch_(arch), lossless_(cfg.k_frac >= 1.0) {}

  StrategyKind kind() const override { return StrategyKind::Stc; }

  BroadcastMsg broadcast(const nn::ModelParams& global,
                         const RoundContext& ctx) override {
    BroadcastMsg bc;
    bc.payload = compress::make_dense(global.values);
    // Round 1 ships the dense model; afterwards the wire carries the
    // compressed averaged delta.
    bc.bits_per_client =
        (ctx.round > 1 && !lossless_) ? last_down_bits_ : bc.payload.bits;
    return bc;
  }

  std::optional<Upload> client_update(const BroadcastMsg& bc, ClientState& state,
                                      const RoundContext& ctx) override {
    nn::ModelParams model{arch_, decode_model(bc)};
    auto trained = nn::local_train(
        model, *ctx.train, state.samples, ctx.local_epochs, ctx.batch_size,
        ctx.eta,
        rng::derive(ctx.master_seed, rng::Purpose::ClientShuffle,
                    static_cast<std::uint64_t>(ctx.round),
                    static_cast<std::uint64_t>(state.id)));
    if (!trained) return std::nullopt;
    std::vector<double> delta(model.values.size());
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta[i] = trained->values[i] - model.values[i];
    if (lossless_)
      return Upload{state.id, state.weight(), compress::make_dense(std::move(delta))};
    auto [update, next_residual] =
        compress::stc_encode(delta, cfg_.k_frac, state.residual);
    state.residual = std::move(next_residual);
    return Upload{state.id, state.weight(), std::move(update)};
  }

  nn::ModelParams aggregate(const nn::ModelParams& global,
                            const std::vector<Upload>& uploads,
                            const RoundContext&) override {
    if (uploads.empty()) throw Error("stc: no uploads in round");
    auto order = sorted_by_id(uploads);
    std::vector<std::vector<double>> vecs;
    std::vector<std::size_t> weights;
    for (const Upload* u : order) {
      std::vector<double> params = compress::decode(u->payload, global.values.size());
      for (std::size_t i = 0; i < params.size(); ++i)
        params[i] += global.values[i];
      vecs.push_back(std::move(params));
      weights.push_back(u->weight);
    }
    nn::ModelParams averaged{arch_, weighted_average(vecs, weights)};
    if (lossless_) return averaged;

    std::vector<double> mean_delta(averaged.values.size());
    for (std::size_t i = 0; i < mean_delta.size(); ++i)
      mean_delta[i] = averaged.values[i] - global.values[i];
    auto [down, next_residual] =
        compress::stc_encode(mean_delta, cfg_.k_frac, server_residual_);
    server_residual_ = std::move(next_residual);
    last_down_bits_ = down.bits;
    std::vector<double> applied = compress::decode(down, mean_delta.size());
    nn::ModelParams replica = global;
    for (std::size_t i = 0; i < applied.size(); ++i)
      replica.values[i] += applied[i];
    return replica;
  }

 private:
  StrategyConfig cfg_;
  nn::ModelArch arch_;
  bool lossless_;
  compress::Residual server_residual_;
  std::uint64_t last_down_bits_ = 0;
};

class CmflStrategy final : public Strategy {
 public:
  CmflStrategy(const StrategyConfig& cfg, const nn::ModelArch& arch)
      : cfg_(cfg), arch_(arch) {}

  StrategyKind kind() const override { return StrategyKind::Cmfl; }

  BroadcastMsg broadcast(const nn::ModelParams& global,
                         const RoundContext&) override {
    BroadcastMsg bc;
    bc.payload = compress::make_dense(global.values);
    bc.bits_per_client = bc.payload.bits;
    return bc;
  }

  std::optional<Upload> client_update(const BroadcastMsg& bc, ClientState& state,
                                      const RoundContext& ctx) override {
    nn::ModelParams model{arch_, decode_model(bc)};
    auto trained = nn::local_train(
        model, *ctx.train, state.samples, ctx.local_epochs, ctx.batch_size,
        ctx.eta,
        rng::derive(ctx.master_seed, rng::Purpose::ClientShuffle,
                    static_cast<std::uint64_t>(ctx.round),
                    static_cast<std::uint64_t>(state.id)));
    if (!trained) return std::nullopt;
    std::vector<double> delta(model.values.size());
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta[i] = trained->values[i] - model.values[i];
    if (ctx.round > 1) {
      if (prev_delta_.size() != delta.size())
        prev_delta_.assign(delta.size(), 0.0);
      if (cmfl_relevance(delta, prev_delta_) < cfg_.cmfl_threshold)
        return std::nullopt;
    }
    return Upload{state.id, state.weight(), compress::make_dense(std::move(delta))};
  }

  nn::ModelParams aggregate(const nn::ModelParams& global,
                            const std::vector<Upload>& uploads,
                            const RoundContext&) override {
    if (uploads.empty()) {
      // Stalled round: every upload was suppressed, the model stands and the
      // reference stays the most recent real aggregated delta. Zeroing it
      // would make relevance-vs-zero (about 0.5) an absorbing state.
      return global;
    }
    auto order = sorted_by_id(uploads);
    std::vector<std::vector<double>> vecs;
    std::vector<std::size_t> weights;
    for (const Upload* u : order) {
      std::vector<double> params = compress::decode(u->payload, global.values.size());
      for (std::size_t i = 0; i < params.size(); ++i)
        params[i] += global.values[i];
      vecs.push_back(std::move(params));
      weights.push_back(u->weight);
    }
    nn::ModelParams next{arch_, weighted_average(vecs, weights)};
    prev_delta_.resize(next.values.size());
    for (std::size_t i = 0; i < next.values.size(); ++i)
      prev_delta_[i] = next.values[i] - global.values[i];
    return next;
  }

 private:
  StrategyConfig cfg_;
  nn::ModelArch arch_;
  std::vector<double> prev_delta_;
};

// FedAvg with the local loss augmented by lambda * MMD^2 between the
// client model's features and the broadcast global model's features on the
// same mini-batch. No raw data crosses the wire.
class FedMmdStrategy final : public Strategy {
 public:
  FedMmdStrategy(const StrategyConfig& cfg, const nn::ModelArch& arch)
      : cfg_(cfg), arch_(arch) {}

  StrategyKind kind() const override { return StrategyKind::FedMmd; }

  BroadcastMsg broadcast(const nn::ModelParams& global,
                         const RoundContext&) override {
    BroadcastMsg bc;
    bc.payload = compress::make_dense(global.values);
    bc.bits_per_client = bc.payload.bits;
    return bc;
  }

  std::optional<Upload> client_update(const BroadcastMsg& bc, ClientState& state,
                                      const RoundContext& ctx) override {
    if (state.samples.empty()) return std::nullopt;
    nn::ModelParams reference{arch_, decode_model(bc)};
    nn::ModelParams model = reference;

    std::vector<std::uint32_t> order(state.samples.begin(), state.samples.end());
    const std::uint64_t seed =
        rng::derive(ctx.master_seed, rng::Purpose::ClientShuffle,
                    static_cast<std::uint64_t>(ctx.round),
                    static_cast<std::uint64_t>(state.id));
    for (int e = 0; e < ctx.local_epochs; ++e) {
      auto eng = rng::make_engine(seed, rng::Purpose::ClientShuffle,
                                  static_cast<std::uint64_t>(e));
      rng::shuffle(order, eng);
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(ctx.batch_size)) {
        const std::size_t end = std::min(
            order.size(), start + static_cast<std::size_t>(ctx.batch_size));
        nn::Batch b = nn::gather(*ctx.train,
                                 std::span(order).subspan(start, end - start));
        Matrix local_f = nn::feature_activations(model, b.features);
        Matrix global_f = nn::feature_activations(reference, b.features);
        const double sigma = cfg_.mmd_bandwidth
                                 ? *cfg_.mmd_bandwidth
                                 : median_bandwidth(local_f, global_f);
        Matrix extra = mmd_gradient(local_f, global_f, sigma);
        for (double& v : extra.data) v *= cfg_.mmd_lambda;
        nn::GradVector g = nn::gradient_with_feature_term(model, b, extra);
        nn::sgd_step_inplace(model, g, ctx.eta);
      }
    }
    return Upload{state.id, state.weight(),
                  compress::make_dense(std::move(model.values))};
  }

  nn::ModelParams aggregate(const nn::ModelParams&,
                            const std::vector<Upload>& uploads,
                            const RoundContext&) override {
    return average_dense_params(arch_, uploads, "fedmmd");
  }

 private:
  StrategyConfig cfg_;
  nn::ModelArch arch_;
};

// One fresh mask set per round, shared by all sampled clients so the
// server-side average is well defined on the surviving coordinates.
class FedDropoutStrategy final : public Strategy {
 public:
  FedDropoutStrategy(const StrategyConfig& cfg, const nn::ModelArch& arch)
      : cfg_(cfg), arch_(arch) {
    if (arch.hidden_layers() < 1)
      throw ConfigError("feddropout needs an MLP architecture");
  }

  StrategyKind kind() const override { return StrategyKind::FedDropout; }

  BroadcastMsg broadcast(const nn::ModelParams& global,
                         const RoundContext& ctx) override {
    BroadcastMsg bc;
    bc.masks = compress::make_masks(
        arch_, cfg_.dropout_rate,
        rng::derive(ctx.master_seed, rng::Purpose::MaskDraw,
                    static_cast<std::uint64_t>(ctx.round)));
    bc.payload = compress::extract_submodel(global, *bc.masks);
    bc.bits_per_client = bc.payload.bits;
    last_masks_ = *bc.masks;
    return bc;
  }

  std::optional<Upload> client_update(const BroadcastMsg& bc, ClientState& state,
                                      const RoundContext& ctx) override {
    const auto& payload = std::get<compress::SubmodelPayload>(bc.payload.payload);
    nn::ModelParams sub{compress::submodel_arch(arch_, *bc.masks), payload.values};
    auto trained = nn::local_train(
        sub, *ctx.train, state.samples, ctx.local_epochs, ctx.batch_size,
        ctx.eta,
        rng::derive(ctx.master_seed, rng::Purpose::ClientShuffle,
                    static_cast<std::uint64_t>(ctx.round),
                    static_cast<std::uint64_t>(state.id)));
    if (!trained) return std::nullopt;
    compress::Update up;
    up.encoding = compress::Encoding::Submodel;
    up.dim = trained->values.size();
    up.payload = compress::SubmodelPayload{std::move(trained->values)};
    up.bits = compress::measure_payload(up);
    return Upload{state.id, state.weight(), std::move(up)};
  }

  nn::ModelParams aggregate(const nn::ModelParams& global,
                            const std::vector<Upload>& uploads,
                            const RoundContext&) override {
    if (uploads.empty()) throw Error("feddropout: no uploads in round");
    auto order = sorted_by_id(uploads);
    std::vector<std::vector<double>> vecs;
    std::vector<std::size_t> weights;
    for (const Upload* u : order) {
      vecs.push_back(std::get<compress::SubmodelPayload>(u->payload.payload).values);
      weights.push_back(u->weight);
    }
    std::vector<double> averaged = weighted_average(vecs, weights);
    compress::Update avg_update;
    avg_update.encoding = compress::Encoding::Submodel;
    avg_update.dim = averaged.size();
    avg_update.payload = compress::SubmodelPayload{std::move(averaged)};
    avg_update.bits = compress::measure_payload(avg_update);
    return compress::expand_submodel(avg_update, last_masks_, global);
  }

 private:
  StrategyConfig cfg_;
  nn::ModelArch arch_;
  compress::MaskSet last_masks_;
};

}  // namespace

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg,
                                        const nn::ModelArch& arch) {
  cfg.validate();
  arch.validate();
  switch (cfg.kind) {
    case StrategyKind::FedAvg:
      return std::make_unique<FedAvgStrategy>(cfg, arch);
    case StrategyKind::SignSgd:
      return std::make_unique<SignSgdStrategy>(cfg, arch);
    case StrategyKind::Stc:
      return std::make_unique<StcStrategy>(cfg, arch);
    case StrategyKind::Cmfl:
      return std::make_unique<CmflStrategy>(cfg, arch);
    case StrategyKind::FedMmd:
      return std::make_unique<FedMmdStrategy>(cfg, arch);
    case StrategyKind::FedDropout:
      return std::make_unique<FedDropoutStrategy>(cfg, arch);
    case StrategyKind::DataShare:
      return std::make_unique<DataShareStrategy>(cfg, arch);
  }
  throw ConfigError("unknown strategy kind");
}

}  // namespace fedsim::strat
