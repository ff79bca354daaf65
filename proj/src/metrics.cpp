#include "dpdiag/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dpdiag::metrics {

namespace {

// Population (1/N) mean, standard deviation, and range, summed left to right.
struct PopulationStats {
  double mean = 0.0;
  double stddev = 0.0;
  double range = 0.0;
};

PopulationStats population_stats(std::span<const double> xs) {
  PopulationStats out;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  double lo = xs[0];
  double hi = xs[0];
  for (double x : xs) {
    sum += x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  out.mean = sum / n;
  double sq = 0.0;
  for (double x : xs) {
    const double d = x - out.mean;
    sq += d * d;
  }
  out.stddev = std::sqrt(sq / n);
  out.range = hi - lo;
  return out;
}

double clamp_cosine(double c) { return std::clamp(c, -1.0, 1.0); }

void require_shared_dimension(std::span<const GradientVector> gradients) {
  for (size_t i = 1; i < gradients.size(); ++i) {
    if (gradients[i].size() != gradients[0].size()) {
      throw DimensionMismatchError(
          "gradient dimension mismatch across workers: " +
          std::to_string(gradients[0].size()) + " vs " +
          std::to_string(gradients[i].size()) + " (worker " +
          std::to_string(i) + ")");
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double l2_norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

// Shared core of direction_consistency: mean pairwise cosine over vectors
// whose precomputed norm passes the zero-direction threshold, via the
// normalized-sum identity.
DirectionConsistency mean_pairwise_cosine(
    std::span<const std::span<const double>> vectors,
    std::span<const double> norms) {
  const int64_t n = static_cast<int64_t>(vectors.size());
  const int64_t total_pairs = n * (n - 1) / 2;

  int64_t included = 0;
  for (double norm : norms) {
    if (norm >= kZeroNormEps) ++included;
  }

  DirectionConsistency out;
  out.excluded_pairs = total_pairs - included * (included - 1) / 2;
  if (included < 2) return out;

  const size_t dim = vectors[0].size();
  std::vector<double> unit_sum(dim, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    if (norms[i] < kZeroNormEps) continue;
    const double inv = 1.0 / norms[i];
    for (size_t k = 0; k < dim; ++k) unit_sum[k] += vectors[i][k] * inv;
  }
  double sumsq = 0.0;
  for (double x : unit_sum) sumsq += x * x;

  const double m = static_cast<double>(included);
  out.value = clamp_cosine((sumsq - m) / (m * (m - 1.0)));
  return out;
}

}  // namespace

LossVector::LossVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw ValidationError("LossVector requires at least one worker loss");
  }
  for (size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("non-finite loss at rank " + std::to_string(i));
    }
  }
}

bool GradientVector::is_finite() const {
  for (double x : components) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

const char* to_string(DirectionSource source) {
  switch (source) {
    case DirectionSource::kNone:
      return "none";
    case DirectionSource::kFullVectors:
      return "full";
    case DirectionSource::kSketches:
      return "sketch";
  }
  return "none";
}

double loss_mean(const LossVector& losses) {
  double sum = 0.0;
  for (double v : losses.values()) sum += v;
  return sum / static_cast<double>(losses.size());
}

double loss_dispersion(const LossVector& losses) {
  return population_stats(losses.values()).stddev;
}

double loss_range(const LossVector& losses) {
  return population_stats(losses.values()).range;
}

double grad_norm(const GradientVector& g) { return l2_norm(g.components); }

GradNormStats grad_norm_stats(std::span<const GradientVector> gradients) {
  if (gradients.empty()) {
    throw ValidationError("grad_norm_stats requires at least one gradient");
  }
  require_shared_dimension(gradients);
  std::vector<double> norms;
  norms.reserve(gradients.size());
  for (const GradientVector& g : gradients) norms.push_back(grad_norm(g));
  const PopulationStats stats = population_stats(norms);
  return GradNormStats{stats.mean, stats.stddev, stats.range};
}

double pairwise_cosine(const GradientVector& gi, const GradientVector& gj) {
  if (gi.size() != gj.size()) {
    throw DimensionMismatchError("pairwise_cosine dimension mismatch: " +
                                 std::to_string(gi.size()) + " vs " +
                                 std::to_string(gj.size()));
  }
  const double ni = grad_norm(gi);
  const double nj = grad_norm(gj);
  if (ni < kZeroNormEps || nj < kZeroNormEps) {
    throw ZeroNormGradientError(
        "gradient norm below zero-direction threshold; pair must be excluded");
  }
  return clamp_cosine(dot(gi.components, gj.components) / (ni * nj));
}

DirectionConsistency direction_consistency(
    std::span<const GradientVector> gradients) {
  if (gradients.size() < 2) {
    throw FewerThanTwoWorkersError(
        "direction consistency requires at least two workers");
  }
  require_shared_dimension(gradients);

  std::vector<std::span<const double>> views;
  std::vector<double> norms;
  views.reserve(gradients.size());
  norms.reserve(gradients.size());
  for (const GradientVector& g : gradients) {
    views.emplace_back(g.components);
    norms.push_back(grad_norm(g));
  }
  return mean_pairwise_cosine(views, norms);
}

ConsistencyMetrics step_metrics(const StepSnapshot& snapshot) {
  const size_t n = snapshot.workers.size();
  if (n == 0) {
    throw ValidationError("step snapshot has no worker records");
  }
  for (size_t i = 1; i < n; ++i) {
    if (snapshot.workers[i].rank <= snapshot.workers[i - 1].rank) {
      throw ValidationError(
          "step snapshot workers must be sorted by rank without duplicates");
    }
  }

  ConsistencyMetrics out;
  out.step = snapshot.step;

  std::vector<double> losses;
  std::vector<double> norms;
  losses.reserve(n);
  norms.reserve(n);
  for (const WorkerStepRecord& w : snapshot.workers) {
    losses.push_back(w.loss);
    norms.push_back(w.grad_norm);
  }
  const LossVector loss_vec(std::move(losses));
  out.mean_loss = loss_mean(loss_vec);
  out.loss_dispersion = loss_dispersion(loss_vec);
  out.loss_range = loss_range(loss_vec);

  const PopulationStats norm_stats = population_stats(norms);
  out.mean_grad_norm = norm_stats.mean;
  out.grad_norm_dispersion = norm_stats.stddev;
  out.grad_norm_range = norm_stats.range;

  size_t with_gradient = 0;
  size_t with_sketch = 0;
  for (const WorkerStepRecord& w : snapshot.workers) {
    if (w.gradient && w.sketch) {
      throw ValidationError("worker record carries both gradient and sketch");
    }
    if (w.gradient) ++with_gradient;
    if (w.sketch) ++with_sketch;
  }
  if ((with_gradient != 0 && with_gradient != n) ||
      (with_sketch != 0 && with_sketch != n)) {
    throw ValidationError(
        "mixed gradient capture within one step; workers are not comparable");
  }

  const int64_t total_pairs =
      static_cast<int64_t>(n) * (static_cast<int64_t>(n) - 1) / 2;

  if (with_gradient == n) {
    out.direction_source = DirectionSource::kFullVectors;
    if (n >= 2) {
      std::vector<GradientVector> gradients;
      gradients.reserve(n);
      for (const WorkerStepRecord& w : snapshot.workers) {
        gradients.push_back(*w.gradient);
      }
      const DirectionConsistency dir = direction_consistency(gradients);
      out.direction_consistency = dir.value;
      out.excluded_pairs = dir.excluded_pairs;
    }
    return out;
  }

  if (with_sketch == n) {
    out.direction_source = DirectionSource::kSketches;
    if (n >= 2) {
      const GradientSketch& first = *snapshot.workers[0].sketch;
      std::vector<std::span<const double>> views;
      std::vector<double> sketch_norms;
      views.reserve(n);
      sketch_norms.reserve(n);
      for (const WorkerStepRecord& w : snapshot.workers) {
        const GradientSketch& s = *w.sketch;
        if (s.sketch_seed != first.sketch_seed || s.k() != first.k() ||
            s.source_dim != first.source_dim) {
          throw IncompatibleSketchError(
              "sketches within one step must share seed, width, and source "
              "dimension");
        }
        views.emplace_back(s.projected);
        // The true norm decides exclusion; a degenerate projection is also
        // excluded since its direction is unusable.
        const double proj_norm = l2_norm(s.projected);
        sketch_norms.push_back(w.grad_norm < kZeroNormEps ? 0.0 : proj_norm);
      }
      const DirectionConsistency dir =
          mean_pairwise_cosine(views, sketch_norms);
      out.direction_consistency = dir.value;
      out.excluded_pairs = dir.excluded_pairs;
    }
    return out;
  }

  // Norm-only capture: no direction information, every pair is excluded.
  out.direction_source = DirectionSource::kNone;
  out.excluded_pairs = total_pairs;
  return out;
}

}  // namespace dpdiag::metrics
