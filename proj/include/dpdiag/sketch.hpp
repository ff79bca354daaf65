#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dpdiag::metrics {

struct GradientVector;

// Fixed-seed random linear projection of a gradient. Two sketches are
// comparable only if sketch_seed, source_dim, and width k all match.
struct GradientSketch {
  std::vector<double> projected;  // length k
  uint64_t sketch_seed = 0;
  int64_t source_dim = 0;

  int64_t k() const { return static_cast<int64_t>(projected.size()); }
};

// Projects vectors onto k seeded Gaussian directions, scaled by 1/sqrt(k).
// Row r, column j is the j-th normal draw of the stream keyed by
// (sketch_seed, kSketchRow, r), so the projection is a pure function of
// (sketch_seed, source_dim, k).
//
// Rows are generated on the fly by default, which keeps memory independent
// of source_dim. Workloads that sketch many vectors can materialize the row
// matrix once; both paths produce bit-identical sketches.
class GaussianSketchProjector {
 public:
  enum class Storage { kStreamRows, kMaterializeRows };

  GaussianSketchProjector(uint64_t sketch_seed, int64_t source_dim, int64_t k,
                          Storage storage = Storage::kStreamRows);

  GradientSketch project(const GradientVector& g) const;
  GradientSketch project(std::span<const double> components) const;

  uint64_t sketch_seed() const { return sketch_seed_; }
  int64_t source_dim() const { return source_dim_; }
  int64_t k() const { return k_; }

 private:
  uint64_t sketch_seed_;
  int64_t source_dim_;
  int64_t k_;
  std::vector<double> rows_;  // k * source_dim when materialized, else empty
};

// One-shot projection with streamed rows.
GradientSketch sketch_project(const GradientVector& g, int64_t k,
                              uint64_t sketch_seed);

// Cosine of the projected vectors, clamped to [-1, 1]. This estimates the
// cosine of the source vectors; it is not an exact value. Throws
// IncompatibleSketchError on a seed/width/dimension mismatch and
// ZeroNormGradientError if either projection has near-zero norm.
double sketch_cosine(const GradientSketch& a, const GradientSketch& b);

}  // namespace dpdiag::metrics
