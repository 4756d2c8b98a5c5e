#include "fedsim/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::compress {

namespace {

void check_finite(std::span<const double> vec) {
  for (double v : vec)
    if (!std::isfinite(v)) throw NumericError("non-finite value in update vector");
}

// vec + residual with an empty residual meaning zeros.
std::vector<double> with_residual(std::span<const double> vec,
                                  const Residual& residual) {
  if (!residual.values.empty() && residual.values.size() != vec.size())
    throw ShapeError("residual length does not match vector");
  std::vector<double> t(vec.begin(), vec.end());
  if (!residual.values.empty())
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += residual.values[i];
  return t;
}

// Indices of the k largest-magnitude coordinates, ties to the lower index,
// returned in ascending index order.
std::vector<std::uint32_t> select_topk(const std::vector<double>& t,
                                       std::size_t k) {
  std::vector<std::uint32_t> idx(t.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   idx.end(), [&](std::uint32_t a, std::uint32_t b) {
                     const double ma = std::fabs(t[a]), mb = std::fabs(t[b]);
                     if (ma != mb) return ma > mb;
                     return a < b;
                   });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::uint32_t ceil_log2(std::size_t dim) {
  if (dim <= 1) return 0;
  return static_cast<std::uint32_t>(std::bit_width(dim - 1));
}

std::size_t topk_count(double k_frac, std::size_t dim) {
  if (!(k_frac > 0.0) || k_frac > 1.0)
    throw ConfigError("k_frac must be in (0, 1]");
  const double raw = k_frac * static_cast<double>(dim);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  k = std::min(k, dim);
  return std::max<std::size_t>(k, 1);
}

Update make_dense(std::vector<double> values) {
  check_finite(values);
  Update u;
  u.encoding = Encoding::Dense;
  u.dim = values.size();
  u.payload = DensePayload{std::move(values)};
  u.bits = measure_payload(u);
  return u;
}

Update sign_compress(std::span<const double> vec) {
  check_finite(vec);
  Update u;
  u.encoding = Encoding::Sign;
  u.dim = vec.size();
  SignPayload p;
  p.signs.resize(vec.size());
  for (std::size_t i = 0; i < vec.size(); ++i)
    p.signs[i] = static_cast<std::int8_t>(sign_of(vec[i]));
  u.payload = std::move(p);
  u.bits = measure_payload(u);
  return u;
}

std::vector<std::int8_t> majority_aggregate(
    const std::vector<std::vector<std::int8_t>>& signs) {
  if (signs.empty()) throw Error("majority_aggregate: empty vote list");
  const std::size_t dim = signs.front().size();
  std::vector<int> votes(dim, 0);
  for (const auto& s : signs) {
    if (s.size() != dim) throw ShapeError("majority_aggregate: dim mismatch");
    for (std::size_t i = 0; i < dim; ++i) votes[i] += s[i];
  }
  std::vector<std::int8_t> out(dim);
  for (std::size_t i = 0; i < dim; ++i)
    out[i] = static_cast<std::int8_t>(votes[i] < 0 ? -1 : 1);
  return out;
}

std::pair<Update, Residual> topk_sparsify(std::span<const double> vec,
                                          double k_frac, const Residual& residual) {
  check_finite(vec);
  std::vector<double> t = with_residual(vec, residual);
  const std::size_t k = topk_count(k_frac, t.size());
  auto idx = select_topk(t, k);

  Update u;
  u.encoding = Encoding::Topk;
  u.dim = t.size();
  TopkPayload p;
  p.indices = idx;
  p.values.reserve(k);
  for (std::uint32_t i : idx) p.values.push_back(t[i]);
  u.payload = std::move(p);
  u.bits = measure_payload(u);

  Residual next{std::move(t)};
  for (std::uint32_t i : idx) next.values[i] = 0.0;
  return {std::move(u), std::move(next)};
}

std::pair<Update, Residual> stc_encode(std::span<const double> vec, double k_frac,
                                       const Residual& residual) {
  check_finite(vec);
  std::vector<double> t = with_residual(vec, residual);
  const std::size_t k = topk_count(k_frac, t.size());
  auto idx = select_topk(t, k);

  double mu = 0.0;
  for (std::uint32_t i : idx) mu += std::fabs(t[i]);
  mu /= static_cast<double>(k);

  Update u;
  u.encoding = Encoding::Ternary;
  u.dim = t.size();
  TernaryPayload p;
  p.mu = mu;
  p.indices = idx;
  p.signs.reserve(k);
  for (std::uint32_t i : idx)
    p.signs.push_back(static_cast<std::int8_t>(sign_of(t[i])));
  u.payload = std::move(p);
  u.bits = measure_payload(u);

  Residual next{std::move(t)};
  for (std::size_t j = 0; j < idx.size(); ++j)
    next.values[idx[j]] -=
        mu * static_cast<double>(std::get<TernaryPayload>(u.payload).signs[j]);
  return {std::move(u), std::move(next)};
}

std::vector<double> decode(const Update& update, std::size_t dim) {
  if (update.dim != dim) throw ShapeError("decode: dimension mismatch");
  std::vector<double> out(dim, 0.0);
  switch (update.encoding) {
    case Encoding::Dense: {
      const auto& p = std::get<DensePayload>(update.payload);
      if (p.values.size() != dim) throw FormatError("decode: dense size mismatch");
      return p.values;
    }
    case Encoding::Sign: {
      const auto& p = std::get<SignPayload>(update.payload);
      if (p.signs.size() != dim) throw FormatError("decode: sign size mismatch");
      for (std::size_t i = 0; i < dim; ++i) out[i] = p.signs[i];
      return out;
    }
    case Encoding::Topk: {
      const auto& p = std::get<TopkPayload>(update.payload);
      for (std::size_t j = 0; j < p.indices.size(); ++j) {
        if (p.indices[j] >= dim) throw FormatError("decode: index out of range");
        out[p.indices[j]] = p.values[j];
      }
      return out;
    }
    case Encoding::Ternary: {
      const auto& p = std::get<TernaryPayload>(update.payload);
      for (std::size_t j = 0; j < p.indices.size(); ++j) {
        if (p.indices[j] >= dim) throw FormatError("decode: index out of range");
        out[p.indices[j]] = p.mu * static_cast<double>(p.signs[j]);
      }
      return out;
    }
    case Encoding::Submodel:
      throw Error("decode: submodel payloads expand via expand_submodel");
  }
  return out;
}

MaskSet make_masks(const nn::ModelArch& arch, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1)");
  if (arch.hidden_layers() < 1)
    throw ConfigError("dropout masks need at least one hidden layer");

  MaskSet masks;
  masks.rate = rate;
  masks.seed = seed;
  auto eng = rng::make_engine(seed, rng::Purpose::MaskDraw);
  for (std::size_t h = 0; h < arch.hidden_layers(); ++h) {
    const std::size_t size = arch.layer_sizes[h + 1];
    const auto keep = static_cast<std::size_t>(
        std::llround((1.0 - rate) * static_cast<double>(size)));
    auto kept = rng::sample_without_replacement(size, keep, eng);
    std::sort(kept.begin(), kept.end());
    masks.kept.push_back(std::move(kept));
  }
  return masks;
}

nn::ModelArch submodel_arch(const nn::ModelArch& arch, const MaskSet& masks) {
  if (masks.kept.size() != arch.hidden_layers())
    throw ShapeError("mask set does not match architecture");
  nn::ModelArch sub = arch;
  for (std::size_t h = 0; h < masks.kept.size(); ++h)
    sub.layer_sizes[h + 1] = masks.kept[h].size();
  return sub;
}

std::uint64_t surviving_count(const nn::ModelArch& arch, const MaskSet& masks) {
  return submodel_arch(arch, masks).param_count();
}

namespace {

// Kept units of activation layer `l` (identity for input and output layers).
std::vector<std::uint32_t> layer_kept(const nn::ModelArch& arch,
                                      const MaskSet& masks, std::size_t l) {
  if (l == 0 || l + 1 == arch.layer_sizes.size()) {
    std::vector<std::uint32_t> all(arch.layer_sizes[l]);
    std::iota(all.begin(), all.end(), 0u);
    return all;
  }
  return masks.kept[l - 1];
}

}  // namespace

Update extract_submodel(const nn::ModelParams& params, const MaskSet& masks) {
  const nn::ModelArch& arch = params.arch;
  const nn::ModelArch sub = submodel_arch(arch, masks);

  SubmodelPayload p;
  p.values.reserve(sub.param_count());
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const auto rows = layer_kept(arch, masks, l);
    const auto cols = layer_kept(arch, masks, l + 1);
    const double* w = params.values.data() + arch.weight_offset(l);
    const std::size_t n_out = arch.layer_sizes[l + 1];
    for (std::uint32_t r : rows)
      for (std::uint32_t c : cols) p.values.push_back(w[r * n_out + c]);
    const double* b = params.values.data() + arch.bias_offset(l);
    for (std::uint32_t c : cols) p.values.push_back(b[c]);
  }

  Update u;
  u.encoding = Encoding::Submodel;
  u.dim = p.values.size();
  u.payload = std::move(p);
  u.bits = measure_payload(u);
  return u;
}

nn::ModelParams expand_submodel(const Update& sub, const MaskSet& masks,
                                const nn::ModelParams& global) {
  if (sub.encoding != Encoding::Submodel)
    throw ShapeError("expand_submodel: update is not a submodel");
  const auto& p = std::get<SubmodelPayload>(sub.payload);
  const nn::ModelArch& arch = global.arch;
  if (p.values.size() != surviving_count(arch, masks))
    throw ShapeError("expand_submodel: payload size does not match masks");

  nn::ModelParams out = global;
  std::size_t cursor = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const auto rows = layer_kept(arch, masks, l);
    const auto cols = layer_kept(arch, masks, l + 1);
    double* w = out.values.data() + arch.weight_offset(l);
    const std::size_t n_out = arch.layer_sizes[l + 1];
    for (std::uint32_t r : rows)
      for (std::uint32_t c : cols) w[r * n_out + c] = p.values[cursor++];
    double* b = out.values.data() + arch.bias_offset(l);
    for (std::uint32_t c : cols) b[c] = p.values[cursor++];
  }
  return out;
}

std::uint64_t measure_payload(const Update& update) {
  const auto dim = static_cast<std::uint64_t>(update.dim);
  switch (update.encoding) {
    case Encoding::Dense:
      return 32 * dim + 64;
    case Encoding::Sign:
      return dim + 64;
    case Encoding::Topk: {
      const auto& p = std::get<TopkPayload>(update.payload);
      const std::uint64_t k = p.indices.size();
      return k * (ceil_log2(update.dim) + 32) + 64;
    }
    case Encoding::Ternary: {
      const auto& p = std::get<TernaryPayload>(update.payload);
      const std::uint64_t k = p.indices.size();
      return 64 + k * (ceil_log2(update.dim) + 1) + 64;
    }
    case Encoding::Submodel: {
      const auto& p = std::get<SubmodelPayload>(update.payload);
      return 32 * static_cast<std::uint64_t>(p.values.size()) + 64;
    }
  }
  return 0;
}

}  // namespace fedsim::compress
