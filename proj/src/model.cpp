#include "dpdiag/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dpdiag/bf16.hpp"
#include "dpdiag/errors.hpp"
#include "dpdiag/rng.hpp"

namespace dpdiag::sim {

Mlp::Mlp(int input_dim, const ModelSpec& spec, int n_classes)
    : activation_(spec.activation) {
  if (input_dim < 1) throw ValidationError("model input_dim must be >= 1");
  if (n_classes < 2) throw ValidationError("model needs at least 2 classes");
  widths_.push_back(input_dim);
  for (int w : spec.hidden_widths) {
    if (w < 1) throw ValidationError("hidden width must be >= 1");
    widths_.push_back(w);
  }
  widths_.push_back(n_classes);

  int64_t offset = 0;
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    LayerView layer;
    layer.in_width = widths_[l];
    layer.out_width = widths_[l + 1];
    layer.weight_offset = offset;
    offset += static_cast<int64_t>(layer.out_width) * layer.in_width;
    layer.bias_offset = offset;
    offset += layer.out_width;
    layers_.push_back(layer);
  }
  param_count_ = offset;
}

std::vector<double> Mlp::init_params(uint64_t seed) const {
  std::vector<double> params(static_cast<size_t>(param_count_), 0.0);
  CounterRng rng{seed, rng_stream::kParamInit};
  for (const LayerView& layer : layers_) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in_width));
    double* w = params.data() + layer.weight_offset;
    const int64_t count = static_cast<int64_t>(layer.out_width) * layer.in_width;
    for (int64_t i = 0; i < count; ++i) w[i] = scale * rng.next_gaussian();
    // biases stay zero
  }
  return params;
}

void Mlp::forward(std::span<const double> params, const Batch& batch,
                  const ForwardOptions& options,
                  std::vector<std::vector<double>>& activations) const {
  if (static_cast<int64_t>(params.size()) != param_count_) {
    throw DimensionMismatchError("parameter vector has wrong length");
  }
  if (batch.size() < 1) throw ValidationError("batch must be nonempty");
  if (static_cast<int64_t>(batch.features.size()) !=
      batch.size() * widths_.front()) {
    throw DimensionMismatchError("batch feature width does not match model");
  }
  const int64_t b = batch.size();

  activations.resize(layers_.size() + 1);
  activations[0] = batch.features;

  for (size_t l = 0; l < layers_.size(); ++l) {
    const LayerView& layer = layers_[l];
    const bool is_output = (l + 1 == layers_.size());
    const std::vector<double>& in = activations[l];
    std::vector<double>& out = activations[l + 1];
    out.assign(static_cast<size_t>(b) * layer.out_width, 0.0);

    const double* weight = params.data() + layer.weight_offset;
    const double* bias = params.data() + layer.bias_offset;
    for (int64_t i = 0; i < b; ++i) {
      const double* x = in.data() + static_cast<size_t>(i) * layer.in_width;
      double* y = out.data() + static_cast<size_t>(i) * layer.out_width;
      for (int o = 0; o < layer.out_width; ++o) {
        double s = bias[o];
        const double* row = weight + static_cast<size_t>(o) * layer.in_width;
        for (int j = 0; j < layer.in_width; ++j) s += row[j] * x[j];
        if (!is_output) {
          s = activation_ == Activation::kTanh ? std::tanh(s)
                                               : (s > 0.0 ? s : 0.0);
        }
        y[o] = options.quantize_activations ? quantize_bf16(s) : s;
      }
    }
  }
}

namespace {

// Per-sample stable softmax cross-entropy; logits are left untouched.
double cross_entropy(const double* logits, int n_classes, int label,
                     double* softmax_out) {
  double max_logit = logits[0];
  for (int c = 1; c < n_classes; ++c) max_logit = std::max(max_logit, logits[c]);
  double sum_exp = 0.0;
  for (int c = 0; c < n_classes; ++c) sum_exp += std::exp(logits[c] - max_logit);
  if (softmax_out != nullptr) {
    for (int c = 0; c < n_classes; ++c) {
      softmax_out[c] = std::exp(logits[c] - max_logit) / sum_exp;
    }
  }
  return max_logit + std::log(sum_exp) - logits[label];
}

}  // namespace

double Mlp::loss(std::span<const double> params, const Batch& batch,
                 const ForwardOptions& options) const {
  std::vector<std::vector<double>> activations;
  forward(params, batch, options, activations);
  const std::vector<double>& logits = activations.back();
  const int classes = widths_.back();

  double total = 0.0;
  for (int64_t i = 0; i < batch.size(); ++i) {
    const int label = batch.labels[i];
    if (label < 0 || label >= classes) {
      throw ValidationError("label out of range");
    }
    total += cross_entropy(logits.data() + static_cast<size_t>(i) * classes,
                           classes, label, nullptr);
  }
  return total / static_cast<double>(batch.size());
}

double Mlp::loss_and_gradient(std::span<const double> params,
                              const Batch& batch, std::span<double> grad_out,
                              const ForwardOptions& options) const {
  if (static_cast<int64_t>(grad_out.size()) != param_count_) {
    throw DimensionMismatchError("gradient buffer has wrong length");
  }
  std::vector<std::vector<double>> activations;
  forward(params, batch, options, activations);

  const int64_t b = batch.size();
  const int classes = widths_.back();
  const double inv_b = 1.0 / static_cast<double>(b);

  // d(loss)/d(logits): (softmax - onehot) / batch.
  std::vector<double> delta(static_cast<size_t>(b) * classes);
  std::vector<double> softmax(static_cast<size_t>(classes));
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const int label = batch.labels[i];
    if (label < 0 || label >= classes) {
      throw ValidationError("label out of range");
    }
    const double* logits =
        activations.back().data() + static_cast<size_t>(i) * classes;
    total += cross_entropy(logits, classes, label, softmax.data());
    double* d = delta.data() + static_cast<size_t>(i) * classes;
    for (int c = 0; c < classes; ++c) {
      d[c] = (softmax[c] - (c == label ? 1.0 : 0.0)) * inv_b;
    }
  }

  for (double& g : grad_out) g = 0.0;

  // Walk layers output-to-input, accumulating in sample order.
  std::vector<double> next_delta;
  for (size_t li = layers_.size(); li-- > 0;) {
    const LayerView& layer = layers_[li];
    const std::vector<double>& in = activations[li];
    double* weight_grad = grad_out.data() + layer.weight_offset;
    double* bias_grad = grad_out.data() + layer.bias_offset;
    const double* weight = params.data() + layer.weight_offset;

    for (int64_t i = 0; i < b; ++i) {
      const double* d = delta.data() + static_cast<size_t>(i) * layer.out_width;
      const double* x = in.data() + static_cast<size_t>(i) * layer.in_width;
      for (int o = 0; o < layer.out_width; ++o) {
        double* wrow = weight_grad + static_cast<size_t>(o) * layer.in_width;
        for (int j = 0; j < layer.in_width; ++j) wrow[j] += d[o] * x[j];
        bias_grad[o] += d[o];
      }
    }

    if (li == 0) break;

    // delta for the previous layer: (W^T d) * act'(a).
    next_delta.assign(static_cast<size_t>(b) * layer.in_width, 0.0);
    for (int64_t i = 0; i < b; ++i) {
      const double* d = delta.data() + static_cast<size_t>(i) * layer.out_width;
      const double* a = in.data() + static_cast<size_t>(i) * layer.in_width;
      double* nd = next_delta.data() + static_cast<size_t>(i) * layer.in_width;
      for (int j = 0; j < layer.in_width; ++j) {
        double s = 0.0;
        for (int o = 0; o < layer.out_width; ++o) {
          s += weight[static_cast<size_t>(o) * layer.in_width + j] * d[o];
        }
        const double dact = activation_ == Activation::kTanh
                                ? 1.0 - a[j] * a[j]
                                : (a[j] > 0.0 ? 1.0 : 0.0);
        nd[j] = s * dact;
      }
    }
    delta.swap(next_delta);
  }

  return total * inv_b;
}

double Mlp::accuracy(std::span<const double> params,
                     std::span<const double> features,
                     std::span<const int> labels) const {
  const int in_width = widths_.front();
  const int64_t n = static_cast<int64_t>(labels.size());
  if (static_cast<int64_t>(features.size()) != n * in_width) {
    throw DimensionMismatchError("feature matrix width does not match model");
  }
  Batch one;
  one.features.resize(in_width);
  one.labels.resize(1, 0);
  std::vector<std::vector<double>> activations;
  int64_t correct = 0;
  for (int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < in_width; ++j) {
      one.features[j] = features[static_cast<size_t>(i) * in_width + j];
    }
    forward(params, one, {}, activations);
    const std::vector<double>& logits = activations.back();
    int best = 0;
    for (int c = 1; c < widths_.back(); ++c) {
      if (logits[c] > logits[best]) best = c;
    }
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::string Mlp::param_order_note() const {
  std::string note = "layers in registration order";
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    note += "; layer " + std::to_string(l) + ": weight row-major [" +
            std::to_string(widths_[l + 1]) + " x " + std::to_string(widths_[l]) +
            "], then bias [" + std::to_string(widths_[l + 1]) + "]";
  }
  return note;
}

}  // namespace dpdiag::sim
