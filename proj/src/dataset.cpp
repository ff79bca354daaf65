#include "dpdiag/dataset.hpp"

#include <cmath>
#include <string>

#include "dpdiag/errors.hpp"
#include "dpdiag/rng.hpp"

namespace dpdiag::sim {

SyntheticDataset generate_dataset(const DataSpec& spec) {
  if (spec.n_classes < 2) {
    throw ValidationError("dataset needs at least 2 classes, got " +
                          std::to_string(spec.n_classes));
  }
  if (spec.n_samples < 1) {
    throw ValidationError("dataset needs at least 1 sample, got " +
                          std::to_string(spec.n_samples));
  }
  if (spec.input_dim < 1) {
    throw ValidationError("dataset input_dim must be >= 1");
  }
  if (!std::isfinite(spec.class_separation) || spec.class_separation < 0.0) {
    throw ValidationError("class_separation must be finite and >= 0");
  }

  SyntheticDataset out;
  out.input_dim = spec.input_dim;
  out.n_classes = spec.n_classes;

  std::vector<double> means(static_cast<size_t>(spec.n_classes) *
                            spec.input_dim);
  for (int c = 0; c < spec.n_classes; ++c) {
    CounterRng rng{spec.seed, rng_stream::kDatasetMeans,
                   static_cast<uint64_t>(c)};
    for (int j = 0; j < spec.input_dim; ++j) {
      means[static_cast<size_t>(c) * spec.input_dim + j] =
          spec.class_separation * rng.next_gaussian();
    }
  }

  out.features.resize(static_cast<size_t>(spec.n_samples) * spec.input_dim);
  out.labels.resize(static_cast<size_t>(spec.n_samples));
  for (int64_t i = 0; i < spec.n_samples; ++i) {
    const int label = static_cast<int>(i % spec.n_classes);
    out.labels[i] = label;
    CounterRng rng{spec.seed, rng_stream::kDatasetNoise,
                   static_cast<uint64_t>(i)};
    const double* mean = means.data() + static_cast<size_t>(label) * spec.input_dim;
    double* row = out.features.data() + static_cast<size_t>(i) * spec.input_dim;
    for (int j = 0; j < spec.input_dim; ++j) {
      row[j] = mean[j] + rng.next_gaussian();
    }
  }
  return out;
}

}  // namespace dpdiag::sim
