#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dpdiag/log_format.hpp"
#include "dpdiag/metrics.hpp"
#include "dpdiag/scenario.hpp"

namespace dpdiag::sim {

// Component-wise arithmetic mean across workers, summed in ascending rank
// order so results are bit-reproducible.
metrics::GradientVector all_reduce_mean(
    std::span<const metrics::GradientVector> gradients);

// Invoked after each synchronized update with every rank's parameter
// replica; used by tests to observe parameter synchrony.
using StepObserver =
    std::function<void(int64_t step, const std::vector<std::vector<double>>&)>;

struct SimResult {
  telemetry::RunLog log;
  // Set when the run stopped early on a non-finite loss or gradient; the log
  // holds everything captured before the failure.
  std::optional<int64_t> halted_step;
  // Rank-0 parameter replica after the last completed step.
  std::vector<double> final_params;
};

// Runs the synchronous data-parallel loop: every step, each rank draws its
// next batch from its shard, computes its pre-reduction loss and gradient
// (injectors applied), the per-worker records are captured, and then the
// mean gradient updates every replica. Replicas are verified bit-identical
// after each step.
SimResult run_scenario(const ScenarioConfig& config,
                       const StepObserver& observer = {});

}  // namespace dpdiag::sim
