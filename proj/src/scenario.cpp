#include "dpdiag/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dpdiag/bf16.hpp"
#include "dpdiag/errors.hpp"
#include "dpdiag/rng.hpp"

namespace dpdiag::sim {

using nlohmann::json;

void ScenarioConfig::validate() const {
  if (world_size < 1) throw ConfigError("world_size must be >= 1");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size_per_worker < 1) {
    throw ConfigError("batch_size_per_worker must be >= 1");
  }
  if (sharding_mode == ShardingMode::kDisjointShards &&
      batch_size_per_worker * world_size > data.n_samples) {
    throw ConfigError(
        "disjoint_shards requires batch_size_per_worker * world_size <= "
        "sample count (" +
        std::to_string(batch_size_per_worker) + " * " +
        std::to_string(world_size) + " > " + std::to_string(data.n_samples) +
        ")");
  }
  if (sharding_mode == ShardingMode::kReplicatedData &&
      batch_size_per_worker > data.n_samples) {
    throw ConfigError("replicated_data requires batch size <= sample count");
  }
  if (!std::isfinite(optimizer.learning_rate)) {
    throw ConfigError("learning_rate must be finite");
  }
  if (!std::isfinite(optimizer.momentum) || optimizer.momentum < 0.0 ||
      optimizer.momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  for (const PerturbationSpec& p : injectors) {
    if (p.kind == PerturbationSpec::Kind::kGradNoise &&
        (!std::isfinite(p.sigma) || p.sigma < 0.0)) {
      throw ConfigError("grad_noise sigma must be finite and >= 0");
    }
  }
  if (gradient_capture == GradientCapture::kSketch && sketch_k < 1) {
    throw ConfigError("sketch_k must be >= 1");
  }
}

uint64_t derive_rank_seed(SeedPolicy policy, uint64_t base_seed,
                          uint64_t alternate_seed, int rank) {
  switch (policy) {
    case SeedPolicy::kStrict:
      return base_seed;
    case SeedPolicy::kRank0Differs:
      return rank == 0 ? alternate_seed : base_seed;
    case SeedPolicy::kPerRank:
      return base_seed + static_cast<uint64_t>(rank);
  }
  throw ValidationError("unknown seed policy");
}

namespace {

std::vector<int64_t> seeded_permutation(uint64_t seed, int64_t epoch,
                                        int64_t n) {
  std::vector<int64_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng{seed, rng_stream::kShard, static_cast<uint64_t>(epoch)};
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j =
        static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace

std::vector<int64_t> shard_indices(int64_t epoch, uint64_t rank_seed, int rank,
                                   int world_size, int64_t n_samples,
                                   ShardingMode mode, uint64_t base_seed) {
  if (n_samples < world_size) {
    throw ValidationError("need at least world_size samples to shard");
  }
  if (rank < 0 || rank >= world_size) {
    throw ValidationError("rank out of range");
  }

  if (mode == ShardingMode::kReplicatedData) {
    return seeded_permutation(base_seed, epoch, n_samples);
  }

  const std::vector<int64_t> perm =
      seeded_permutation(rank_seed, epoch, n_samples);
  const int64_t shard_len = n_samples / world_size;
  std::vector<int64_t> shard(static_cast<size_t>(shard_len));
  for (int64_t k = 0; k < shard_len; ++k) {
    shard[k] = perm[static_cast<size_t>(rank) + static_cast<size_t>(k) * world_size];
  }
  return shard;
}

void apply_injectors(std::span<double> gradient,
                     std::span<const PerturbationSpec> injectors,
                     uint64_t rank_seed, int64_t step) {
  for (const PerturbationSpec& p : injectors) {
    switch (p.kind) {
      case PerturbationSpec::Kind::kGradNoise: {
        if (p.sigma == 0.0) break;  // bitwise no-op
        CounterRng rng{rank_seed, rng_stream::kGradNoise,
                       static_cast<uint64_t>(step)};
        for (double& g : gradient) g += p.sigma * rng.next_gaussian();
        break;
      }
      case PerturbationSpec::Kind::kBf16Quantize: {
        if (p.target == PerturbationSpec::QuantTarget::kActivations) break;
        for (double& g : gradient) g = quantize_bf16(g);
        break;
      }
    }
  }
}

bool quantizes_activations(std::span<const PerturbationSpec> injectors) {
  for (const PerturbationSpec& p : injectors) {
    if (p.kind == PerturbationSpec::Kind::kBf16Quantize &&
        (p.target == PerturbationSpec::QuantTarget::kActivations ||
         p.target == PerturbationSpec::QuantTarget::kBoth)) {
      return true;
    }
  }
  return false;
}

SgdOptimizer::SgdOptimizer(const OptimizerSpec& spec, int64_t dim)
    : spec_(spec), velocity_(static_cast<size_t>(dim), 0.0) {}

void SgdOptimizer::step(std::span<double> params,
                        std::span<const double> gradient, int64_t step_index) {
  if (params.size() != velocity_.size() || gradient.size() != params.size()) {
    throw DimensionMismatchError("optimizer dimension mismatch");
  }
  for (double g : gradient) {
    if (!std::isfinite(g)) {
      throw HaltRunError(step_index,
                         "non-finite gradient at step " +
                             std::to_string(step_index) +
                             "; halting the run");
    }
  }
  const double lr = spec_.learning_rate;
  const double mu = spec_.momentum;
  for (size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = mu * velocity_[i] + gradient[i];
    params[i] -= lr * velocity_[i];
  }
}

// --- JSON schema ---

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
  if (!j.is_object()) {
    throw ConfigError(context + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError("unknown key \"" + key + "\" in " + context);
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& context) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for \"" + std::string(key) + "\" in " +
                      context + ": " + e.what());
  }
}

std::string policy_name(SeedPolicy p) {
  switch (p) {
    case SeedPolicy::kStrict:
      return "strict";
    case SeedPolicy::kRank0Differs:
      return "rank0_differs";
    case SeedPolicy::kPerRank:
      return "per_rank";
  }
  return "strict";
}

SeedPolicy policy_from(const std::string& s) {
  if (s == "strict") return SeedPolicy::kStrict;
  if (s == "rank0_differs") return SeedPolicy::kRank0Differs;
  if (s == "per_rank") return SeedPolicy::kPerRank;
  throw ConfigError("unknown seed_policy \"" + s + "\"");
}

std::string sharding_name(ShardingMode m) {
  return m == ShardingMode::kDisjointShards ? "disjoint_shards"
                                            : "replicated_data";
}

ShardingMode sharding_from(const std::string& s) {
  if (s == "disjoint_shards") return ShardingMode::kDisjointShards;
  if (s == "replicated_data") return ShardingMode::kReplicatedData;
  throw ConfigError("unknown sharding_mode \"" + s + "\"");
}

std::string capture_name(GradientCapture c) {
  switch (c) {
    case GradientCapture::kFull:
      return "full";
    case GradientCapture::kSketch:
      return "sketch";
    case GradientCapture::kNormOnly:
      return "norm_only";
  }
  return "full";
}

GradientCapture capture_from(const std::string& s) {
  if (s == "full") return GradientCapture::kFull;
  if (s == "sketch") return GradientCapture::kSketch;
  if (s == "norm_only") return GradientCapture::kNormOnly;
  throw ConfigError("unknown gradient_capture \"" + s + "\"");
}

std::string activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation \"" + s + "\"");
}

json injector_to_json(const PerturbationSpec& p) {
  json j;
  if (p.kind == PerturbationSpec::Kind::kGradNoise) {
    j["kind"] = "grad_noise";
    j["sigma"] = p.sigma;
  } else {
    j["kind"] = "bf16_quantize";
    switch (p.target) {
      case PerturbationSpec::QuantTarget::kGradients:
        j["target"] = "gradients";
        break;
      case PerturbationSpec::QuantTarget::kActivations:
        j["target"] = "activations";
        break;
      case PerturbationSpec::QuantTarget::kBoth:
        j["target"] = "both";
        break;
    }
  }
  return j;
}

PerturbationSpec injector_from_json(const json& j, size_t index) {
  const std::string context = "injectors[" + std::to_string(index) + "]";
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError(context + " must be an object with a \"kind\"");
  }
  const std::string kind = j.at("kind").get<std::string>();
  PerturbationSpec p;
  if (kind == "grad_noise") {
    check_keys(j, {"kind", "sigma"}, context);
    p.kind = PerturbationSpec::Kind::kGradNoise;
    p.sigma = get_or<double>(j, "sigma", 0.0, context);
  } else if (kind == "bf16_quantize") {
    check_keys(j, {"kind", "target"}, context);
    p.kind = PerturbationSpec::Kind::kBf16Quantize;
    const std::string target =
        get_or<std::string>(j, "target", "gradients", context);
    if (target == "gradients") {
      p.target = PerturbationSpec::QuantTarget::kGradients;
    } else if (target == "activations") {
      p.target = PerturbationSpec::QuantTarget::kActivations;
    } else if (target == "both") {
      p.target = PerturbationSpec::QuantTarget::kBoth;
    } else {
      throw ConfigError("unknown bf16_quantize target \"" + target + "\"");
    }
  } else {
    throw ConfigError(context + ": unknown injector kind \"" + kind + "\"");
  }
  return p;
}

}  // namespace

json config_to_json(const ScenarioConfig& config) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["world_size"] = config.world_size;
  j["steps"] = config.steps;
  j["batch_size_per_worker"] = config.batch_size_per_worker;
  j["base_seed"] = config.base_seed;
  j["seed_policy"] = policy_name(config.seed_policy);
  j["alternate_seed"] = config.alternate_seed;
  j["sharding_mode"] = sharding_name(config.sharding_mode);
  j["model"] = {{"hidden_widths", config.model.hidden_widths},
                {"activation", activation_name(config.model.activation)}};
  j["data"] = {{"samples", config.data.n_samples},
               {"input_dim", config.data.input_dim},
               {"classes", config.data.n_classes},
               {"seed", config.data.seed},
               {"class_separation", config.data.class_separation}};
  j["optimizer"] = {{"learning_rate", config.optimizer.learning_rate},
                    {"momentum", config.optimizer.momentum}};
  j["injectors"] = json::array();
  for (const PerturbationSpec& p : config.injectors) {
    j["injectors"].push_back(injector_to_json(p));
  }
  j["gradient_capture"] = capture_name(config.gradient_capture);
  j["sketch_k"] = config.sketch_k;
  return j;
}

ScenarioConfig config_from_json(const json& j) {
  check_keys(j,
             {"schema_version", "world_size", "steps", "batch_size_per_worker",
              "base_seed", "seed_policy", "alternate_seed", "sharding_mode",
              "model", "data", "optimizer", "injectors", "gradient_capture",
              "sketch_k"},
             "config");
  if (!j.contains("schema_version")) {
    throw ConfigError("config is missing \"schema_version\"");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version " +
                      std::to_string(version));
  }

  ScenarioConfig config;
  config.world_size = get_or<int>(j, "world_size", config.world_size, "config");
  config.steps = get_or<int64_t>(j, "steps", config.steps, "config");
  config.batch_size_per_worker = get_or<int64_t>(
      j, "batch_size_per_worker", config.batch_size_per_worker, "config");
  config.base_seed =
      get_or<uint64_t>(j, "base_seed", config.base_seed, "config");
  config.seed_policy = policy_from(
      get_or<std::string>(j, "seed_policy", "strict", "config"));
  config.alternate_seed =
      get_or<uint64_t>(j, "alternate_seed", config.base_seed + 9973, "config");
  config.sharding_mode = sharding_from(
      get_or<std::string>(j, "sharding_mode", "disjoint_shards", "config"));

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"hidden_widths", "activation"}, "model");
    config.model.hidden_widths = get_or<std::vector<int>>(
        m, "hidden_widths", config.model.hidden_widths, "model");
    config.model.activation =
        activation_from(get_or<std::string>(m, "activation", "tanh", "model"));
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, {"samples", "input_dim", "classes", "seed",
                   "class_separation"},
               "data");
    config.data.n_samples =
        get_or<int64_t>(d, "samples", config.data.n_samples, "data");
    config.data.input_dim =
        get_or<int>(d, "input_dim", config.data.input_dim, "data");
    config.data.n_classes =
        get_or<int>(d, "classes", config.data.n_classes, "data");
    config.data.seed = get_or<uint64_t>(d, "seed", config.data.seed, "data");
    config.data.class_separation = get_or<double>(
        d, "class_separation", config.data.class_separation, "data");
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, {"learning_rate", "momentum"}, "optimizer");
    config.optimizer.learning_rate = get_or<double>(
        o, "learning_rate", config.optimizer.learning_rate, "optimizer");
    config.optimizer.momentum =
        get_or<double>(o, "momentum", config.optimizer.momentum, "optimizer");
  }
  if (j.contains("injectors")) {
    const json& arr = j.at("injectors");
    if (!arr.is_array()) throw ConfigError("injectors must be an array");
    config.injectors.clear();
    for (size_t i = 0; i < arr.size(); ++i) {
      config.injectors.push_back(injector_from_json(arr[i], i));
    }
  }
  config.gradient_capture = capture_from(
      get_or<std::string>(j, "gradient_capture", "full", "config"));
  config.sketch_k = get_or<int64_t>(j, "sketch_k", config.sketch_k, "config");

  config.validate();
  return config;
}

ScenarioConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file: " + path.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace dpdiag::sim
