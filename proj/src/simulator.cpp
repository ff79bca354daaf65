#include "dpdiag/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "dpdiag/rng.hpp"

namespace dpdiag::sim {

metrics::GradientVector all_reduce_mean(
    std::span<const metrics::GradientVector> gradients) {
  if (gradients.empty()) {
    throw ValidationError("all_reduce_mean needs at least one gradient");
  }
  const size_t dim = gradients[0].size();
  for (const metrics::GradientVector& g : gradients) {
    if (g.size() != dim) {
      throw DimensionMismatchError("all_reduce_mean dimension mismatch");
    }
  }
  metrics::GradientVector out;
  out.components.assign(dim, 0.0);
  for (const metrics::GradientVector& g : gradients) {
    for (size_t k = 0; k < dim; ++k) out.components[k] += g.components[k];
  }
  const double inv_n = 1.0 / static_cast<double>(gradients.size());
  for (double& x : out.components) x *= inv_n;
  return out;
}

namespace {

Batch gather_batch(const SyntheticDataset& data,
                   std::span<const int64_t> indices) {
  Batch batch;
  batch.features.reserve(indices.size() * data.input_dim);
  batch.labels.reserve(indices.size());
  for (int64_t idx : indices) {
    const std::span<const double> row = data.sample(idx);
    batch.features.insert(batch.features.end(), row.begin(), row.end());
    batch.labels.push_back(data.labels[idx]);
  }
  return batch;
}

}  // namespace

SimResult run_scenario(const ScenarioConfig& config,
                       const StepObserver& observer) {
  config.validate();

  const SyntheticDataset data = generate_dataset(config.data);
  const Mlp model(config.data.input_dim, config.model, config.data.n_classes);
  const int64_t dim = model.param_count();
  const int n = config.world_size;

  const ForwardOptions forward_options{quantizes_activations(config.injectors)};

  // Every replica starts from the same (base-seed) initialization; the
  // data-parallel contract keeps them identical from then on.
  const std::vector<double> initial_params = model.init_params(config.base_seed);
  std::vector<std::vector<double>> replicas(
      static_cast<size_t>(n), initial_params);
  std::vector<SgdOptimizer> optimizers(
      static_cast<size_t>(n), SgdOptimizer(config.optimizer, dim));

  std::vector<uint64_t> rank_seeds(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    rank_seeds[r] = derive_rank_seed(config.seed_policy, config.base_seed,
                                     config.alternate_seed, r);
  }

  const int64_t shard_len =
      config.sharding_mode == ShardingMode::kDisjointShards
          ? data.size() / n
          : data.size();
  const int64_t batches_per_epoch = shard_len / config.batch_size_per_worker;
  if (config.steps > 0 && batches_per_epoch < 1) {
    throw ConfigError("shard too small for one batch per epoch");
  }

  std::optional<metrics::GaussianSketchProjector> sketcher;
  if (config.gradient_capture == GradientCapture::kSketch) {
    // Desk-scale models are small enough to materialize the row matrix.
    const bool materialize = config.sketch_k * dim <= (int64_t{1} << 27);
    sketcher.emplace(config.base_seed, dim, config.sketch_k,
                     materialize
                         ? metrics::GaussianSketchProjector::Storage::kMaterializeRows
                         : metrics::GaussianSketchProjector::Storage::kStreamRows);
  }

  SimResult result;
  result.log.manifest.run_id = telemetry::run_id_for_config(config);
  result.log.manifest.world_size = n;
  result.log.manifest.config = config;
  result.log.manifest.prng = CounterRng::kName;
  result.log.manifest.param_order = model.param_order_note();
  result.log.manifest.created_at = "";  // deterministic output

  std::vector<std::vector<int64_t>> shards(static_cast<size_t>(n));
  std::vector<int64_t> shard_epoch(static_cast<size_t>(n), -1);
  std::vector<metrics::GradientVector> gradients(static_cast<size_t>(n));
  std::vector<double> grad_buffer(static_cast<size_t>(dim));

  for (int64_t t = 0; t < config.steps; ++t) {
    const int64_t epoch = t / batches_per_epoch;
    const int64_t slot = t % batches_per_epoch;

    metrics::StepSnapshot snapshot;
    snapshot.step = t;
    snapshot.workers.reserve(static_cast<size_t>(n));

    bool capture_failed = false;
    for (int r = 0; r < n && !capture_failed; ++r) {
      if (shard_epoch[r] != epoch) {
        shards[r] = shard_indices(epoch, rank_seeds[r], r, n, data.size(),
                                  config.sharding_mode, config.base_seed);
        shard_epoch[r] = epoch;
      }
      const std::span<const int64_t> batch_indices(
          shards[r].data() + slot * config.batch_size_per_worker,
          static_cast<size_t>(config.batch_size_per_worker));
      const Batch batch = gather_batch(data, batch_indices);

      const double loss = model.loss_and_gradient(replicas[r], batch,
                                                  grad_buffer, forward_options);
      apply_injectors(grad_buffer, config.injectors, rank_seeds[r], t);

      metrics::GradientVector g;
      g.components.assign(grad_buffer.begin(), grad_buffer.end());
      if (!std::isfinite(loss) || !g.is_finite()) {
        capture_failed = true;
        break;
      }

      metrics::WorkerStepRecord record;
      record.rank = r;
      record.loss = loss;
      record.grad_norm = metrics::grad_norm(g);
      switch (config.gradient_capture) {
        case GradientCapture::kFull:
          record.gradient = g;
          break;
        case GradientCapture::kSketch:
          record.sketch = sketcher->project(g);
          break;
        case GradientCapture::kNormOnly:
          break;
      }
      snapshot.workers.push_back(std::move(record));
      gradients[r] = std::move(g);
    }

    if (capture_failed) {
      result.halted_step = t;
      break;
    }

    result.log.steps.push_back(std::move(snapshot));

    const metrics::GradientVector reduced = all_reduce_mean(gradients);
    try {
      for (int r = 0; r < n; ++r) {
        optimizers[r].step(replicas[r], reduced.components, t);
      }
    } catch (const HaltRunError& e) {
      result.halted_step = e.step;
      break;
    }

    for (int r = 1; r < n; ++r) {
      if (replicas[r] != replicas[0]) {
        throw std::logic_error(
            "parameter replicas diverged after synchronized update at step " +
            std::to_string(t));
      }
    }
    if (observer) observer(t, replicas);
  }

  result.final_params = std::move(replicas[0]);
  return result;
}

}  // namespace dpdiag::sim
