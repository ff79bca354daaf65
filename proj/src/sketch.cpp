#include "dpdiag/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpdiag/errors.hpp"
#include "dpdiag/metrics.hpp"
#include "dpdiag/rng.hpp"

namespace dpdiag::metrics {

GaussianSketchProjector::GaussianSketchProjector(uint64_t sketch_seed,
                                                 int64_t source_dim, int64_t k,
                                                 Storage storage)
    : sketch_seed_(sketch_seed), source_dim_(source_dim), k_(k) {
  if (k < 1) throw ValidationError("sketch width k must be >= 1");
  if (source_dim < 1) throw ValidationError("sketch source_dim must be >= 1");
  if (storage == Storage::kMaterializeRows) {
    rows_.resize(static_cast<size_t>(k) * static_cast<size_t>(source_dim));
    for (int64_t r = 0; r < k; ++r) {
      CounterRng rng{sketch_seed_, rng_stream::kSketchRow,
                     static_cast<uint64_t>(r)};
      double* row = rows_.data() + static_cast<size_t>(r) * source_dim;
      for (int64_t j = 0; j < source_dim; ++j) row[j] = rng.next_gaussian();
    }
  }
}

GradientSketch GaussianSketchProjector::project(
    std::span<const double> components) const {
  if (static_cast<int64_t>(components.size()) != source_dim_) {
    throw DimensionMismatchError(
        "sketch projector built for dimension " + std::to_string(source_dim_) +
        ", got vector of dimension " + std::to_string(components.size()));
  }
  GradientSketch out;
  out.sketch_seed = sketch_seed_;
  out.source_dim = source_dim_;
  out.projected.resize(static_cast<size_t>(k_));

  const double scale = 1.0 / std::sqrt(static_cast<double>(k_));
  if (!rows_.empty()) {
    for (int64_t r = 0; r < k_; ++r) {
      const double* row = rows_.data() + static_cast<size_t>(r) * source_dim_;
      double s = 0.0;
      for (int64_t j = 0; j < source_dim_; ++j) s += row[j] * components[j];
      out.projected[r] = s * scale;
    }
  } else {
    for (int64_t r = 0; r < k_; ++r) {
      CounterRng rng{sketch_seed_, rng_stream::kSketchRow,
                     static_cast<uint64_t>(r)};
      double s = 0.0;
      for (int64_t j = 0; j < source_dim_; ++j) {
        s += rng.next_gaussian() * components[j];
      }
      out.projected[r] = s * scale;
    }
  }
  return out;
}

GradientSketch GaussianSketchProjector::project(const GradientVector& g) const {
  return project(std::span<const double>(g.components));
}

GradientSketch sketch_project(const GradientVector& g, int64_t k,
                              uint64_t sketch_seed) {
  const GaussianSketchProjector projector(
      sketch_seed, static_cast<int64_t>(g.size()), k);
  return projector.project(g);
}

double sketch_cosine(const GradientSketch& a, const GradientSketch& b) {
  if (a.sketch_seed != b.sketch_seed || a.source_dim != b.source_dim ||
      a.k() != b.k()) {
    throw IncompatibleSketchError(
        "sketches are comparable only with matching seed, width, and source "
        "dimension");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (size_t i = 0; i < a.projected.size(); ++i) {
    dot += a.projected[i] * b.projected[i];
    na += a.projected[i] * a.projected[i];
    nb += b.projected[i] * b.projected[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < kZeroNormEps || nb < kZeroNormEps) {
    throw ZeroNormGradientError("sketch projection has near-zero norm");
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

}  // namespace dpdiag::metrics
