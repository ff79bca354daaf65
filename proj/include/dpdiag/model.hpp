#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dpdiag::sim {

enum class Activation { kTanh, kRelu };

struct ModelSpec {
  std::vector<int> hidden_widths = {16};
  Activation activation = Activation::kTanh;
};

// A training batch: gathered feature rows plus labels.
struct Batch {
  std::vector<double> features;  // size x input_dim, row-major
  std::vector<int> labels;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
};

struct ForwardOptions {
  // Round hidden activations and logits to bf16 after each layer.
  bool quantize_activations = false;
};

// Fully-connected softmax classifier with tanh (or relu) hidden layers.
// Parameters live in a single flat vector; registration order is, per layer,
// the weight matrix row-major [out x in] followed by the bias. Gradients are
// flattened in the same order. All arithmetic is 64-bit with fixed
// summation order, so equal inputs give bit-identical results.
class Mlp {
 public:
  Mlp(int input_dim, const ModelSpec& spec, int n_classes);

  int64_t param_count() const { return param_count_; }
  int input_dim() const { return widths_.front(); }
  int n_classes() const { return widths_.back(); }

  // Gaussian weights scaled by 1/sqrt(fan_in), zero biases; drawn in
  // registration order from the stream keyed by (seed, kParamInit).
  std::vector<double> init_params(uint64_t seed) const;

  // Mean cross-entropy over the batch.
  double loss(std::span<const double> params, const Batch& batch,
              const ForwardOptions& options = {}) const;

  // Loss plus its exact reverse-mode gradient with respect to all
  // parameters. grad_out must have param_count() elements.
  double loss_and_gradient(std::span<const double> params, const Batch& batch,
                           std::span<double> grad_out,
                           const ForwardOptions& options = {}) const;

  // Fraction of samples whose argmax logit matches the label.
  double accuracy(std::span<const double> params,
                  std::span<const double> features,
                  std::span<const int> labels) const;

  // Human-readable description of the flattening order, recorded in run
  // manifests so external logs can match it.
  std::string param_order_note() const;

 private:
  struct LayerView {
    int64_t weight_offset;
    int64_t bias_offset;
    int in_width;
    int out_width;
  };

  void forward(std::span<const double> params, const Batch& batch,
               const ForwardOptions& options,
               std::vector<std::vector<double>>& activations) const;

  std::vector<int> widths_;  // input, hidden..., classes
  std::vector<LayerView> layers_;
  Activation activation_;
  int64_t param_count_;
};

}  // namespace dpdiag::sim
