#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpdiag/errors.hpp"
#include "dpdiag/sketch.hpp"

namespace dpdiag::metrics {

// Gradients with L2 norm below this threshold carry no usable direction.
// Pairs containing such a gradient are excluded from direction consistency
// and counted, rather than being assigned cosine 0.
inline constexpr double kZeroNormEps = 1e-12;

// Per-worker scalar losses at one step, indexed by rank. Construction
// rejects empty input and non-finite entries.
class LossVector {
 public:
  explicit LossVector(std::vector<double> values);
  LossVector(std::initializer_list<double> values)
      : LossVector(std::vector<double>(values)) {}

  std::span<const double> values() const { return values_; }
  size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

// One worker's flattened gradient. Components follow the model's parameter
// registration order; all workers within a step must share the dimension.
struct GradientVector {
  std::vector<double> components;

  size_t size() const { return components.size(); }
  bool is_finite() const;
};

enum class DirectionSource { kNone, kFullVectors, kSketches };

const char* to_string(DirectionSource source);

// Cross-worker statistics for a single step. Dispersions are population
// standard deviations (1/N divisor). direction_consistency is the mean
// pairwise cosine over included worker pairs; it is absent exactly when
// every pair was excluded (or no direction information was captured).
struct ConsistencyMetrics {
  int64_t step = 0;
  double mean_loss = 0.0;
  double loss_dispersion = 0.0;
  double loss_range = 0.0;
  double mean_grad_norm = 0.0;
  double grad_norm_dispersion = 0.0;
  double grad_norm_range = 0.0;
  std::optional<double> direction_consistency;
  int64_t excluded_pairs = 0;
  DirectionSource direction_source = DirectionSource::kNone;
};

// One worker's pre-reduction signals at one step. grad_norm is always
// present; at most one of {gradient, sketch} is.
struct WorkerStepRecord {
  int rank = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::optional<GradientVector> gradient;
  std::optional<GradientSketch> sketch;
};

// The aligned collection of all workers' records at one step, sorted by
// rank with no duplicates.
struct StepSnapshot {
  int64_t step = 0;
  std::vector<WorkerStepRecord> workers;
};

// Mean of per-worker losses, summed in ascending rank order.
double loss_mean(const LossVector& losses);

// Population standard deviation of per-worker losses.
double loss_dispersion(const LossVector& losses);

// max - min of per-worker losses; 0 for a single worker.
double loss_range(const LossVector& losses);

// Euclidean norm over all components, summed in component order.
double grad_norm(const GradientVector& g);

struct GradNormStats {
  double mean = 0.0;
  double dispersion = 0.0;
  double range = 0.0;
};

// Mean, population standard deviation, and range of per-worker gradient
// norms. Throws DimensionMismatchError if dimensions differ.
GradNormStats grad_norm_stats(std::span<const GradientVector> gradients);

// dot(gi, gj) / (|gi| |gj|), clamped to [-1, 1] to absorb rounding.
// Throws ZeroNormGradientError if either norm is below kZeroNormEps.
double pairwise_cosine(const GradientVector& gi, const GradientVector& gj);

struct DirectionConsistency {
  // Absent exactly when every unordered pair was excluded.
  std::optional<double> value;
  int64_t excluded_pairs = 0;
};

// Mean cosine similarity over all unordered worker pairs whose members both
// have norm >= kZeroNormEps. Computed via the normalized-sum identity
// (sum over pairs of cosines == (|sum of unit vectors|^2 - M) / 2); the unit
// suite checks it against the explicit pairwise loop. Requires N >= 2.
DirectionConsistency direction_consistency(
    std::span<const GradientVector> gradients);

// Populates every per-step statistic from one snapshot. Norm statistics use
// the stored per-worker grad_norm values; direction consistency uses full
// gradients when present, sketches otherwise, and the source is recorded in
// direction_source. Snapshots whose workers carry neither (or a single
// worker) yield an absent direction value.
ConsistencyMetrics step_metrics(const StepSnapshot& snapshot);

}  // namespace dpdiag::metrics
