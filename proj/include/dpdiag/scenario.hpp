#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dpdiag/dataset.hpp"
#include "dpdiag/model.hpp"

#include "json.hpp"

namespace dpdiag::sim {

// Seed assignment across ranks: all ranks share the base seed; only rank 0
// deviates; or every rank gets base_seed + rank.
enum class SeedPolicy { kStrict, kRank0Differs, kPerRank };

// disjoint_shards mirrors a strided distributed sampler; replicated_data
// hands every rank the identical sample sequence.
enum class ShardingMode { kDisjointShards, kReplicatedData };

// What each worker record stores about its gradient.
enum class GradientCapture { kFull, kSketch, kNormOnly };

struct PerturbationSpec {
  enum class Kind { kGradNoise, kBf16Quantize };
  enum class QuantTarget { kGradients, kActivations, kBoth };

  Kind kind = Kind::kGradNoise;
  double sigma = 0.0;                                // grad_noise
  QuantTarget target = QuantTarget::kGradients;      // bf16_quantize
};

struct OptimizerSpec {
  double learning_rate = 0.05;
  double momentum = 0.0;
};

// Full deterministic description of a simulated run: equal configs produce
// byte-identical logs.
struct ScenarioConfig {
  int world_size = 8;
  int64_t steps = 200;
  int64_t batch_size_per_worker = 16;
  ModelSpec model;
  DataSpec data;
  OptimizerSpec optimizer;
  SeedPolicy seed_policy = SeedPolicy::kStrict;
  uint64_t alternate_seed = 0;  // rank-0 seed under kRank0Differs
  ShardingMode sharding_mode = ShardingMode::kDisjointShards;
  std::vector<PerturbationSpec> injectors;
  uint64_t base_seed = 1001;
  GradientCapture gradient_capture = GradientCapture::kFull;
  int64_t sketch_k = 1024;

  void validate() const;  // throws ConfigError on inconsistency
};

// Rank seed under a policy: strict -> base for all ranks; rank0_differs ->
// alternate for rank 0, base otherwise; per_rank -> base + rank.
uint64_t derive_rank_seed(SeedPolicy policy, uint64_t base_seed,
                          uint64_t alternate_seed, int rank);

// Index sequence a rank draws batches from during one epoch.
//
// disjoint_shards: permute [0, n) with the stream keyed by (rank_seed,
// kShard, epoch), then take positions congruent to rank mod world_size,
// truncated to floor(n / world_size) entries per rank. When all ranks share
// rank_seed the shards partition the permutation; under per-rank seeds the
// permutations differ and shards may overlap.
//
// replicated_data: every rank receives the identical full permutation keyed
// by (base_seed, kShard, epoch), regardless of its rank seed.
std::vector<int64_t> shard_indices(int64_t epoch, uint64_t rank_seed, int rank,
                                   int world_size, int64_t n_samples,
                                   ShardingMode mode, uint64_t base_seed);

// Applies the configured perturbations to a pre-reduction gradient in list
// order. Gradient noise draws from the stream keyed by
// (rank_seed, kGradNoise, step); sigma = 0 leaves the input untouched.
void apply_injectors(std::span<double> gradient,
                     std::span<const PerturbationSpec> injectors,
                     uint64_t rank_seed, int64_t step);

// True if any injector rounds activations to bf16.
bool quantizes_activations(std::span<const PerturbationSpec> injectors);

// Gradient descent with optional classical momentum. Throws HaltRunError if
// the incoming gradient has a non-finite component.
class SgdOptimizer {
 public:
  SgdOptimizer(const OptimizerSpec& spec, int64_t dim);

  void step(std::span<double> params, std::span<const double> gradient,
            int64_t step_index);

 private:
  OptimizerSpec spec_;
  std::vector<double> velocity_;
};

// --- configuration file schema (JSON, versioned, unknown keys rejected) ---

inline constexpr int kConfigSchemaVersion = 1;

nlohmann::json config_to_json(const ScenarioConfig& config);
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config_file(const std::filesystem::path& path);

}  // namespace dpdiag::sim
