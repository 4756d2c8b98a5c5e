#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/matrix.hpp"

namespace fedsim::nn {

// Layer sizes input -> hidden... -> classes. Hidden activation is ReLU, the
// output layer is softmax over cross-entropy. A two-entry list is multinomial
// logistic regression.
struct ModelArch {
  std::vector<std::size_t> layer_sizes;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t class_count() const { return layer_sizes.back(); }
  std::size_t weight_layers() const { return layer_sizes.size() - 1; }
  std::size_t hidden_layers() const { return layer_sizes.size() - 2; }

  // Total parameters: sum over layers of n_l*n_{l+1} + n_{l+1}.
  std::size_t param_count() const;

  // Offset of W_l (row-major n_l x n_{l+1}) in the flat vector; biases of
  // layer l follow its weights.
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  void validate() const;  // ConfigError on sizes < 1 or fewer than 2 layers

  bool operator==(const ModelArch&) const = default;
};

// Flat parameter vector in canonical order: W_0, b_0, W_1, b_1, ...
struct ModelParams {
  ModelArch arch;
  std::vector<double> values;
};

struct Batch {
  Matrix features;          // samples x input_dim
  std::vector<int> labels;  // class ids
};

using GradVector = std::vector<double>;

Batch gather(const data::Dataset& d, std::span<const std::uint32_t> indices);

// Per-layer Glorot-uniform weights (a = sqrt(6/(fan_in+fan_out))), zero
// biases. Identical (arch, seed) gives a bit-identical vector.
ModelParams init_model(const ModelArch& arch, std::uint64_t seed);

struct ForwardResult {
  double loss = 0.0;  // mean negative log softmax probability of true class
  Matrix logits;      // samples x classes
};

ForwardResult forward_loss(const ModelParams& params, const Batch& batch);

// Exact analytic gradient of forward_loss, mean over the batch.
GradVector gradient(const ModelParams& params, const Batch& batch);

// Activations of the feature layer used by distribution-matching losses:
// the last hidden layer for an MLP, the logits for logistic regression.
Matrix feature_activations(const ModelParams& params, const Matrix& features);

// gradient() plus an extra gradient term applied at the feature layer
// (samples x feature_dim), back-propagated through the earlier layers.
GradVector gradient_with_feature_term(const ModelParams& params, const Batch& batch,
                                      const Matrix& extra_feature_grad);

ModelParams sgd_step(const ModelParams& params, const GradVector& grad, double eta);
void sgd_step_inplace(ModelParams& params, const GradVector& grad, double eta);

// E epochs of mini-batch SGD over the given sample indices. Each epoch
// shuffles with a seed-derived stream and splits into ceil(n/B) batches,
// keeping the short tail batch. Empty index list returns nullopt (client
// skip signal).
std::optional<ModelParams> local_train(const ModelParams& params,
                                       const data::Dataset& d,
                                       std::span<const std::uint32_t> indices,
                                       int epochs, int batch_size, double eta,
                                       std::uint64_t seed);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Accuracy by argmax with ties broken toward the lowest class index, plus
// mean cross-entropy. Empty dataset raises Error.
EvalResult evaluate(const ModelParams& params, const data::Dataset& d);

}  // namespace fedsim::nn
