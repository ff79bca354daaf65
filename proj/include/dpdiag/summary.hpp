#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpdiag/log_format.hpp"
#include "dpdiag/metrics.hpp"

namespace dpdiag::telemetry {

// Arithmetic means of the per-step statistics over a window of steps.
// direction_consistency averages only steps where a value is present.
struct MetricMeans {
  double mean_loss = 0.0;
  double loss_dispersion = 0.0;
  double loss_range = 0.0;
  double mean_grad_norm = 0.0;
  double grad_norm_dispersion = 0.0;
  double grad_norm_range = 0.0;
  std::optional<double> direction_consistency;
};

MetricMeans metric_means(std::span<const metrics::ConsistencyMetrics> series);

struct RunSummary {
  std::string run_id;
  std::vector<metrics::ConsistencyMetrics> series;  // complete steps, ascending
  int64_t step_count = 0;
  int64_t skipped_steps = 0;  // gapped steps excluded from the series
  MetricMeans means;
  int64_t total_excluded_pairs = 0;
};

// Per-step metrics for every complete step plus run-level means. Throws
// NoCompleteStepsError when the log has no complete step.
RunSummary summarize_run(const RunLog& run);

// CSV of the per-step series: one row per step, one column per statistic,
// header row using the ConsistencyMetrics field names. An absent
// direction_consistency serializes as an empty cell.
std::string series_csv(const RunSummary& summary);
void write_series_csv(const RunSummary& summary,
                      const std::filesystem::path& path);

enum class StepAlignment { kRequireEqual, kTruncateToShortest };

struct ComparisonReport {
  std::vector<std::string> run_ids;  // input order; first is the baseline
  int64_t steps_used = 0;
  bool truncated = false;
  // Row r aligns with run_ids[r]; means recomputed over the common window.
  std::vector<MetricMeans> means;
  // max over steps of |mean_loss(run r, t) - mean_loss(baseline, t)|.
  std::vector<double> masking_indicator;
  // For each statistic in kComparedMetricNames order: run ids sorted by
  // ascending mean, ties broken by run id (input-order independent).
  std::vector<std::vector<std::string>> ordering;
};

inline constexpr const char* kComparedMetricNames[] = {
    "mean_loss",          "loss_dispersion",       "loss_range",
    "mean_grad_norm",     "grad_norm_dispersion",  "grad_norm_range",
    "direction_consistency"};

// Compares >= 2 summaries. With kRequireEqual, differing step counts raise
// StepCountMismatchError; with kTruncateToShortest the common prefix is used
// and `truncated` is set.
ComparisonReport compare_runs(std::span<const RunSummary> summaries,
                              StepAlignment alignment = StepAlignment::kRequireEqual);

std::string report_csv(const ComparisonReport& report);
void write_report_csv(const ComparisonReport& report,
                      const std::filesystem::path& path);

// Fixed-width human-readable rendering of the report.
std::string report_table(const ComparisonReport& report);

}  // namespace dpdiag::telemetry
