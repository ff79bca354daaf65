#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dpdiag::sim {

// Synthetic Gaussian-mixture classification data. Per-class means are drawn
// from the seeded generator and scaled by class_separation; features are the
// class mean plus unit-variance noise. Fully determined by the seed.
struct DataSpec {
  int64_t n_samples = 1024;
  int input_dim = 8;
  int n_classes = 4;
  uint64_t seed = 7001;
  double class_separation = 3.0;
};

struct SyntheticDataset {
  std::vector<double> features;  // n_samples x input_dim, row-major
  std::vector<int> labels;       // n_samples, balanced (label = index mod C)
  int input_dim = 0;
  int n_classes = 0;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  std::span<const double> sample(int64_t i) const {
    return std::span<const double>(features)
        .subspan(static_cast<size_t>(i) * input_dim, input_dim);
  }
};

SyntheticDataset generate_dataset(const DataSpec& spec);

}  // namespace dpdiag::sim
