#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "fedsim/nn.hpp"

namespace fedsim::compress {

enum class Encoding { Dense, Sign, Topk, Ternary, Submodel };

struct DensePayload {
  std::vector<double> values;
};
struct SignPayload {
  std::vector<std::int8_t> signs;  // +1 / -1 per coordinate
};
struct TopkPayload {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};
struct TernaryPayload {
  double mu = 0.0;
  std::vector<std::uint32_t> indices;
  std::vector<std::int8_t> signs;
};
struct SubmodelPayload {
  std::vector<double> values;  // surviving parameters in canonical order
};

// One wire payload. `bits` always equals the accounting formula of its
// encoding (see measure_payload).
struct Update {
  Encoding encoding = Encoding::Dense;
  std::size_t dim = 0;
  std::uint64_t bits = 0;
  std::variant<DensePayload, SignPayload, TopkPayload, TernaryPayload,
               SubmodelPayload>
      payload;
};

// Error-feedback accumulator for the lossy codecs. An empty value vector is
// treated as all zeros (the state of a freshly created client).
struct Residual {
  std::vector<double> values;
};

// Kept-unit indices per hidden layer, strictly increasing. Input and output
// layers are never masked.
struct MaskSet {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint32_t>> kept;
};

// sign(0) = +1 throughout this module.
inline int sign_of(double v) { return v < 0.0 ? -1 : 1; }

// ceil(log2(dim)) used for index widths; 0 for dim <= 1.
std::uint32_t ceil_log2(std::size_t dim);

// Coordinates kept by the sparsifiers: k = max(1, ceil(k_frac * dim)),
// capped at dim. Half values like 78.5 round up.
std::size_t topk_count(double k_frac, std::size_t dim);

Update make_dense(std::vector<double> values);

Update sign_compress(std::span<const double> vec);

// Per-coordinate +-1 vote; the result takes the sign of the vote sum with
// ties going to +1.
std::vector<std::int8_t> majority_aggregate(
    const std::vector<std::vector<std::int8_t>>& signs);

// Keep the k largest-magnitude coordinates of vec + residual (ties to the
// lower index) with exact values; the new residual is what was not sent.
std::pair<Update, Residual> topk_sparsify(std::span<const double> vec,
                                          double k_frac, const Residual& residual);

// Sparse ternary: top-k selection, then all kept values replaced by +-mu
// where mu is the mean magnitude of the kept coordinates.
std::pair<Update, Residual> stc_encode(std::span<const double> vec, double k_frac,
                                       const Residual& residual);

// Dense reconstruction of dense/sign/topk/ternary payloads. Submodel
// payloads expand via expand_submodel.
std::vector<double> decode(const Update& update, std::size_t dim);

// Uniform without-replacement draw of round((1-rate)*size) kept units per
// hidden layer.
MaskSet make_masks(const nn::ModelArch& arch, double rate, std::uint64_t seed);

// Architecture of the thinned network (hidden sizes replaced by kept counts).
nn::ModelArch submodel_arch(const nn::ModelArch& arch, const MaskSet& masks);

std::uint64_t surviving_count(const nn::ModelArch& arch, const MaskSet& masks);

// Rows/columns of each weight matrix incident to kept units, plus kept-unit
// biases, flattened in canonical order.
Update extract_submodel(const nn::ModelParams& params, const MaskSet& masks);

// Writes the surviving coordinates back over a copy of `global`; dropped
// coordinates keep their global values.
nn::ModelParams expand_submodel(const Update& sub, const MaskSet& masks,
                                const nn::ModelParams& global);

// Exact bit accounting:
//   dense:    32*dim + 64
//   sign:     dim + 64
//   topk:     k*(ceil_log2(dim) + 32) + 64
//   ternary:  64 + k*(ceil_log2(dim) + 1) + 64
//   submodel: 32*surviving + 64
std::uint64_t measure_payload(const Update& update);

}  // namespace fedsim::compress
