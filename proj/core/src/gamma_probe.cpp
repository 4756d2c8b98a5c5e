#include "fedsim/gamma_probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fedsim/compression.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::gamma {

namespace {

constexpr double kZeroTolerance = 1e-12;

std::array<double, 3> quartiles(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
  };
  return {at(0.25), at(0.50), at(0.75)};
}

}  // namespace

std::string to_string(DataMode mode) {
  return mode == DataMode::IidSample ? "iid-sample" : "single-class";
}

nn::GradVector full_gradient(const nn::ModelParams& params,
                             const data::Dataset& d) {
  if (d.size() == 0) throw Error("full_gradient: empty dataset");
  std::vector<std::uint32_t> all(d.size());
  std::iota(all.begin(), all.end(), 0u);
  return nn::gradient(params, nn::gather(d, all));
}

SignProbeResult gamma_estimate(const nn::ModelParams& params,
                               const data::Dataset& d, const ProbeConfig& cfg,
                               std::uint64_t seed) {
  if (cfg.batch_sizes.empty())
    throw ConfigError("gamma probe: batch size list is empty");
  for (std::size_t i = 0; i + 1 < cfg.batch_sizes.size(); ++i)
    if (cfg.batch_sizes[i] >= cfg.batch_sizes[i + 1])
      throw ConfigError("gamma probe: batch sizes must be strictly increasing");
  if (!cfg.exhaustive && cfg.trials < 1)
    throw ConfigError("gamma probe: trials must be >= 1");
  for (int s : cfg.batch_sizes) {
    if (s < 1) throw ConfigError("gamma probe: batch size must be >= 1");
    if (static_cast<std::size_t>(s) > d.size())
      throw ConfigError("gamma probe: batch size exceeds dataset size");
  }
  if (cfg.exhaustive && cfg.mode != DataMode::IidSample)
    throw ConfigError("gamma probe: exhaustive mode is iid-sample only");

  std::vector<std::vector<std::uint32_t>> by_class;
  if (cfg.mode == DataMode::SingleClass) {
    by_class.resize(d.class_count);
    for (std::size_t i = 0; i < d.size(); ++i)
      by_class[static_cast<std::size_t>(d.labels[i])].push_back(
          static_cast<std::uint32_t>(i));
    std::size_t min_class = d.size();
    for (const auto& members : by_class)
      if (!members.empty()) min_class = std::min(min_class, members.size());
    for (int s : cfg.batch_sizes)
      if (static_cast<std::size_t>(s) > min_class)
        throw ConfigError("gamma probe: batch size exceeds smallest class");
  }

  const nn::GradVector reference = full_gradient(params, d);
  std::vector<std::uint32_t> kept;
  for (std::size_t p = 0; p < reference.size(); ++p)
    if (std::fabs(reference[p]) > kZeroTolerance)
      kept.push_back(static_cast<std::uint32_t>(p));
  if (kept.empty()) throw Error("gamma probe: reference gradient is all zero");
  std::vector<int> ref_sign(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i)
    ref_sign[i] = compress::sign_of(reference[kept[i]]);

  SignProbeResult result;
  result.mode = cfg.mode;
  result.batch_sizes = cfg.batch_sizes;
  result.kept_parameters = kept.size();

  for (int s : cfg.batch_sizes) {
    std::vector<std::uint64_t> matches(kept.size(), 0);
    std::uint64_t total_trials = 0;

    auto tally = [&](const std::vector<std::uint32_t>& batch_idx) {
      nn::GradVector g = nn::gradient(params, nn::gather(d, batch_idx));
      for (std::size_t i = 0; i < kept.size(); ++i)
        if (compress::sign_of(g[kept[i]]) == ref_sign[i]) ++matches[i];
      ++total_trials;
    };

    if (cfg.exhaustive) {
      // Every size-s subset in lexicographic order.
      const std::size_t n = d.size();
      std::vector<std::uint32_t> comb(s);
      std::iota(comb.begin(), comb.end(), 0u);
      while (true) {
        tally(comb);
        int i = s - 1;
        while (i >= 0 && comb[static_cast<std::size_t>(i)] ==
                             n - static_cast<std::size_t>(s - i)) {
          --i;
        }
        if (i < 0) break;
        ++comb[static_cast<std::size_t>(i)];
        for (std::size_t j = static_cast<std::size_t>(i) + 1;
             j < static_cast<std::size_t>(s); ++j)
          comb[j] = comb[j - 1] + 1;
        if (total_trials > 2'000'000)
          throw ConfigError("gamma probe: exhaustive subset count too large");
      }
    } else {
      for (int t = 0; t < cfg.trials; ++t) {
        auto eng = rng::make_engine(seed, rng::Purpose::GammaTrial,
                                    static_cast<std::uint64_t>(s),
                                    static_cast<std::uint64_t>(t));
        std::vector<std::uint32_t> batch_idx;
        if (cfg.mode == DataMode::IidSample) {
          batch_idx = rng::sample_without_replacement(
              d.size(), static_cast<std::uint64_t>(s), eng);
        } else {
          std::size_t label;
          do {
            label = static_cast<std::size_t>(
                rng::uniform_below(eng, static_cast<std::uint64_t>(d.class_count)));
          } while (by_class[label].empty());
          auto picks = rng::sample_without_replacement(
              by_class[label].size(), static_cast<std::uint64_t>(s), eng);
          batch_idx.reserve(picks.size());
          for (std::uint32_t p : picks) batch_idx.push_back(by_class[label][p]);
        }
        tally(batch_idx);
      }
    }

    std::vector<double> per_param(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
      per_param[i] = static_cast<double>(matches[i]) /
                     static_cast<double>(total_trials);
    const double mean =
        std::accumulate(per_param.begin(), per_param.end(), 0.0) /
        static_cast<double>(per_param.size());
    result.gamma_mean.push_back(mean);
    result.quantiles.push_back(quartiles(std::move(per_param)));
    result.trials = static_cast<int>(total_trials);
  }
  return result;
}

GammaReport gamma_report(std::span<const SignProbeResult> results) {
  GammaReport report;
  for (const SignProbeResult& r : results) {
    for (std::size_t i = 0; i < r.batch_sizes.size(); ++i) {
      GammaRow row;
      row.mode = to_string(r.mode);
      row.s = r.batch_sizes[i];
      row.trials = r.trials;
      row.mean = r.gamma_mean[i];
      row.p25 = r.quantiles[i][0];
      row.p50 = r.quantiles[i][1];
      row.p75 = r.quantiles[i][2];
      report.rows.push_back(std::move(row));
    }
    bool grows = !r.gamma_mean.empty();
    for (std::size_t i = 0; i + 1 < r.gamma_mean.size(); ++i)
      if (r.gamma_mean[i + 1] < r.gamma_mean[i] - 0.03) grows = false;
    if (!r.gamma_mean.empty() &&
        r.gamma_mean.back() - r.gamma_mean.front() <= 0.05)
      grows = false;
    report.growth_flags.emplace_back(to_string(r.mode), grows);
  }
  return report;
}

std::string gamma_csv(const GammaReport& report) {
  std::string out = "mode,s,trials,gamma_mean,gamma_p25,gamma_p50,gamma_p75\n";
  char buf[160];
  for (const GammaRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6g,%.6g,%.6g,%.6g\n",
                  r.mode.c_str(), r.s, r.trials, r.mean, r.p25, r.p50, r.p75);
    out += buf;
  }
  return out;
}

}  // namespace fedsim::gamma
