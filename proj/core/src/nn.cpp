#include "fedsim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t m = a.rows, k = a.cols, n = b.cols;
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.row(i);
    const double* arow = a.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row(p);
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_at_b_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t k = a.rows, m = a.cols, n = b.cols;
  for (std::size_t r = 0; r < k; ++r) {
    const double* arow = a.row(r);
    const double* brow = b.row(r);
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* orow = out.row(i);
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_a_bt_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t m = a.rows, n = a.cols, k = b.rows;
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
      orow[j] += acc;
    }
  }
}

}  // namespace fedsim

namespace fedsim::nn {

std::size_t ModelArch::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    total += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return total;
}

std::size_t ModelArch::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l)
    off += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return off;
}

std::size_t ModelArch::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
}

void ModelArch::validate() const {
  if (layer_sizes.size() < 2)
    throw ConfigError("model arch needs at least input and output sizes");
  for (std::size_t s : layer_sizes)
    if (s < 1) throw ConfigError("model arch layer size must be >= 1");
}

Batch gather(const data::Dataset& d, std::span<const std::uint32_t> indices) {
  Batch b;
  b.features = Matrix(indices.size(), d.dim());
  b.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::uint32_t idx = indices[i];
    if (idx >= d.size()) throw ShapeError("gather: sample index out of range");
    std::memcpy(b.features.row(i), d.features.row(idx), d.dim() * sizeof(double));
    b.labels[i] = d.labels[idx];
  }
  return b;
}

ModelParams init_model(const ModelArch& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p{arch, std::vector<double>(arch.param_count(), 0.0)};
  auto eng = rng::make_engine(seed, rng::Purpose::ModelInit);
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const std::size_t fan_in = arch.layer_sizes[l];
    const std::size_t fan_out = arch.layer_sizes[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    double* w = p.values.data() + arch.weight_offset(l);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i)
      w[i] = (2.0 * rng::uniform01(eng) - 1.0) * a;
    // biases stay zero
  }
  return p;
}

namespace {

struct ForwardCache {
  // activations[0] is the input batch; activations[l] the output of layer
  // l-1 (post-ReLU for hidden layers, raw logits for the last).
  std::vector<Matrix> activations;
  double loss = 0.0;
};

void check_batch(const ModelParams& params, const Batch& batch) {
  if (batch.features.cols != params.arch.input_dim())
    throw ShapeError("batch feature dimension does not match model input");
  if (batch.features.rows != batch.labels.size())
    throw ShapeError("batch feature/label row counts differ");
  if (batch.labels.empty()) throw Error("empty batch");
  const int classes = static_cast<int>(params.arch.class_count());
  for (int y : batch.labels)
    if (y < 0 || y >= classes) throw ShapeError("batch label out of range");
}

void affine_forward(const ModelParams& params, std::size_t layer,
                    const Matrix& in, Matrix& out, bool relu) {
  const ModelArch& arch = params.arch;
  const std::size_t n_out = arch.layer_sizes[layer + 1];
  const double* w = params.values.data() + arch.weight_offset(layer);
  const double* bias = params.values.data() + arch.bias_offset(layer);
  out = Matrix(in.rows, n_out);
  for (std::size_t i = 0; i < in.rows; ++i) {
    double* orow = out.row(i);
    const double* arow = in.row(i);
    for (std::size_t j = 0; j < n_out; ++j) orow[j] = bias[j];
    for (std::size_t p = 0; p < in.cols; ++p) {
      const double av = arow[p];
      const double* wrow = w + p * n_out;
      for (std::size_t j = 0; j < n_out; ++j) orow[j] += av * wrow[j];
    }
  }
  if (relu) {
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  }
}

ForwardCache forward_cache(const ModelParams& params, const Batch& batch) {
  check_batch(params, batch);
  const std::size_t layers = params.arch.weight_layers();
  ForwardCache cache;
  cache.activations.resize(layers + 1);
  cache.activations[0] = batch.features;
  for (std::size_t l = 0; l < layers; ++l) {
    affine_forward(params, l, cache.activations[l], cache.activations[l + 1],
                   /*relu=*/l + 1 < layers);
  }
  // Mean NLL via logsumexp.
  const Matrix& logits = cache.activations[layers];
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    total += lse - row[static_cast<std::size_t>(batch.labels[i])];
  }
  cache.loss = total / static_cast<double>(logits.rows);
  return cache;
}

GradVector backward(const ModelParams& params, const Batch& batch,
                    const ForwardCache& cache, const Matrix* extra_feature_grad) {
  const ModelArch& arch = params.arch;
  const std::size_t layers = arch.weight_layers();
  const Matrix& logits = cache.activations[layers];
  const std::size_t n = logits.rows;

  // d(mean NLL)/dlogits = (softmax - onehot) / n
  Matrix delta(n, logits.cols);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.row(i);
    double* drow = delta.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      drow[j] = std::exp(row[j] - mx);
      sum += drow[j];
    }
    for (std::size_t j = 0; j < logits.cols; ++j) drow[j] /= sum;
    drow[static_cast<std::size_t>(batch.labels[i])] -= 1.0;
    for (std::size_t j = 0; j < logits.cols; ++j)
      drow[j] /= static_cast<double>(n);
  }

  if (extra_feature_grad && layers == 1) {
    // Logistic regression: the logits are the feature layer.
    if (extra_feature_grad->rows != delta.rows ||
        extra_feature_grad->cols != delta.cols)
      throw ShapeError("feature gradient shape mismatch");
    for (std::size_t i = 0; i < delta.data.size(); ++i)
      delta.data[i] += extra_feature_grad->data[i];
  }

  GradVector grad(params.values.size(), 0.0);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& a_in = cache.activations[l];
    const std::size_t n_in = arch.layer_sizes[l];
    const std::size_t n_out = arch.layer_sizes[l + 1];

    // dW_l = a_in^T * delta
    Matrix dw(n_in, n_out);
    matmul_at_b_accumulate(a_in, delta, dw);
    std::copy(dw.data.begin(), dw.data.end(),
              grad.begin() + static_cast<std::ptrdiff_t>(arch.weight_offset(l)));
    // db_l = column sums of delta
    double* db = grad.data() + arch.bias_offset(l);
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* drow = delta.row(i);
      for (std::size_t j = 0; j < n_out; ++j) db[j] += drow[j];
    }

    if (l == 0) break;

    // delta_prev = delta * W_l^T, masked by the ReLU of a_in.
    const double* w = params.values.data() + arch.weight_offset(l);
    Matrix prev(delta.rows, n_in);
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* drow = delta.row(i);
      double* prow = prev.row(i);
      for (std::size_t p = 0; p < n_in; ++p) {
        const double* wrow = w + p * n_out;
        double acc = 0.0;
        for (std::size_t j = 0; j < n_out; ++j) acc += drow[j] * wrow[j];
        prow[p] = acc;
      }
    }

    if (extra_feature_grad && l == layers - 1) {
      // MLP: the feature layer is the last hidden activation.
      if (extra_feature_grad->rows != prev.rows ||
          extra_feature_grad->cols != prev.cols)
        throw ShapeError("feature gradient shape mismatch");
      for (std::size_t i = 0; i < prev.data.size(); ++i)
        prev.data[i] += extra_feature_grad->data[i];
    }

    for (std::size_t i = 0; i < prev.data.size(); ++i)
      if (a_in.data[i] <= 0.0) prev.data[i] = 0.0;
    delta = std::move(prev);
  }
  return grad;
}

}  // namespace

ForwardResult forward_loss(const ModelParams& params, const Batch& batch) {
  ForwardCache cache = forward_cache(params, batch);
  return ForwardResult{cache.loss, std::move(cache.activations.back())};
}

GradVector gradient(const ModelParams& params, const Batch& batch) {
  ForwardCache cache = forward_cache(params, batch);
  return backward(params, batch, cache, nullptr);
}

Matrix feature_activations(const ModelParams& params, const Matrix& features) {
  if (features.cols != params.arch.input_dim())
    throw ShapeError("feature dimension does not match model input");
  const std::size_t layers = params.arch.weight_layers();
  const std::size_t feature_layer = layers == 1 ? 1 : layers - 1;
  Matrix current = features;
  for (std::size_t l = 0; l < feature_layer; ++l) {
    Matrix next;
    affine_forward(params, l, current, next, /*relu=*/l + 1 < layers);
    current = std::move(next);
  }
  return current;
}

GradVector gradient_with_feature_term(const ModelParams& params, const Batch& batch,
                                      const Matrix& extra_feature_grad) {
  ForwardCache cache = forward_cache(params, batch);
  return backward(params, batch, cache, &extra_feature_grad);
}

ModelParams sgd_step(const ModelParams& params, const GradVector& grad, double eta) {
  ModelParams out = params;
  sgd_step_inplace(out, grad, eta);
  return out;
}

void sgd_step_inplace(ModelParams& params, const GradVector& grad, double eta) {
  if (grad.size() != params.values.size())
    throw ShapeError("gradient length does not match parameter vector");
  for (std::size_t i = 0; i < grad.size(); ++i)
    params.values[i] -= eta * grad[i];
}

std::optional<ModelParams> local_train(const ModelParams& params,
                                       const data::Dataset& d,
                                       std::span<const std::uint32_t> indices,
                                       int epochs, int batch_size, double eta,
                                       std::uint64_t seed) {
  if (epochs < 1 || batch_size < 1)
    throw ConfigError("local_train: epochs and batch size must be >= 1");
  if (indices.empty()) return std::nullopt;

  ModelParams model = params;
  std::vector<std::uint32_t> order(indices.begin(), indices.end());
  for (int e = 0; e < epochs; ++e) {
    auto eng = rng::make_engine(seed, rng::Purpose::ClientShuffle,
                                static_cast<std::uint64_t>(e));
    rng::shuffle(order, eng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      Batch b = gather(d, std::span(order).subspan(start, end - start));
      GradVector g = gradient(model, b);
      sgd_step_inplace(model, g, eta);
    }
  }
  return model;
}

EvalResult evaluate(const ModelParams& params, const data::Dataset& d) {
  if (d.size() == 0) throw Error("evaluate: empty dataset");
  if (d.dim() != params.arch.input_dim())
    throw ShapeError("dataset dimension does not match model input");

  const std::size_t chunk = 512;
  std::size_t correct = 0;
  double total_nll = 0.0;
  std::vector<std::uint32_t> idx;
  for (std::size_t start = 0; start < d.size(); start += chunk) {
    const std::size_t end = std::min(d.size(), start + chunk);
    idx.resize(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = static_cast<std::uint32_t>(start + i);
    Batch b = gather(d, idx);
    ForwardResult fwd = forward_loss(params, b);
    total_nll += fwd.loss * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < fwd.logits.rows; ++i) {
      const double* row = fwd.logits.row(i);
      std::size_t best = 0;
      for (std::size_t j = 1; j < fwd.logits.cols; ++j)
        if (row[j] > row[best]) best = j;  // ties keep the lower index
      if (static_cast<int>(best) == b.labels[i]) ++correct;
    }
  }
  return EvalResult{static_cast<double>(correct) / static_cast<double>(d.size()),
                    total_nll / static_cast<double>(d.size())};
}

}  // namespace fedsim::nn
