#include "dpdiag/summary.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dpdiag::telemetry {

namespace {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double mean_of(std::span<const metrics::ConsistencyMetrics> series,
               double (*pick)(const metrics::ConsistencyMetrics&)) {
  double sum = 0.0;
  for (const metrics::ConsistencyMetrics& m : series) sum += pick(m);
  return sum / static_cast<double>(series.size());
}

}  // namespace

MetricMeans metric_means(std::span<const metrics::ConsistencyMetrics> series) {
  if (series.empty()) {
    throw EmptyInputError("metric_means over an empty series");
  }
  MetricMeans out;
  out.mean_loss = mean_of(series, [](const auto& m) { return m.mean_loss; });
  out.loss_dispersion =
      mean_of(series, [](const auto& m) { return m.loss_dispersion; });
  out.loss_range = mean_of(series, [](const auto& m) { return m.loss_range; });
  out.mean_grad_norm =
      mean_of(series, [](const auto& m) { return m.mean_grad_norm; });
  out.grad_norm_dispersion =
      mean_of(series, [](const auto& m) { return m.grad_norm_dispersion; });
  out.grad_norm_range =
      mean_of(series, [](const auto& m) { return m.grad_norm_range; });

  double dir_sum = 0.0;
  int64_t dir_count = 0;
  for (const metrics::ConsistencyMetrics& m : series) {
    if (m.direction_consistency) {
      dir_sum += *m.direction_consistency;
      ++dir_count;
    }
  }
  if (dir_count > 0) {
    out.direction_consistency = dir_sum / static_cast<double>(dir_count);
  }
  return out;
}

RunSummary summarize_run(const RunLog& run) {
  RunSummary summary;
  summary.run_id = run.manifest.run_id;

  for (const metrics::StepSnapshot& snap : run.steps) {
    if (!run.step_complete(snap)) continue;
    summary.series.push_back(metrics::step_metrics(snap));
    summary.total_excluded_pairs += summary.series.back().excluded_pairs;
  }
  if (summary.series.empty()) {
    throw NoCompleteStepsError("log for run " + run.manifest.run_id +
                               " has no complete step");
  }
  summary.step_count = static_cast<int64_t>(summary.series.size());
  summary.skipped_steps = run.gap_steps;
  summary.means = metric_means(summary.series);
  return summary;
}

std::string series_csv(const RunSummary& summary) {
  std::string out =
      "step,mean_loss,loss_dispersion,loss_range,mean_grad_norm,"
      "grad_norm_dispersion,grad_norm_range,direction_consistency,"
      "excluded_pairs\n";
  for (const metrics::ConsistencyMetrics& m : summary.series) {
    out += std::to_string(m.step);
    out += ',';
    out += format_double(m.mean_loss);
    out += ',';
    out += format_double(m.loss_dispersion);
    out += ',';
    out += format_double(m.loss_range);
    out += ',';
    out += format_double(m.mean_grad_norm);
    out += ',';
    out += format_double(m.grad_norm_dispersion);
    out += ',';
    out += format_double(m.grad_norm_range);
    out += ',';
    if (m.direction_consistency) out += format_double(*m.direction_consistency);
    out += ',';
    out += std::to_string(m.excluded_pairs);
    out += '\n';
  }
  return out;
}

void write_series_csv(const RunSummary& summary,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open CSV for writing: " + path.string());
  out << series_csv(summary);
  out.flush();
  if (!out) throw IoError("failed writing CSV: " + path.string());
}

ComparisonReport compare_runs(std::span<const RunSummary> summaries,
                              StepAlignment alignment) {
  if (summaries.size() < 2) {
    throw EmptyInputError("compare_runs needs at least two summaries");
  }

  int64_t common = summaries[0].step_count;
  bool mismatch = false;
  for (const RunSummary& s : summaries) {
    if (s.step_count != summaries[0].step_count) mismatch = true;
    common = std::min(common, s.step_count);
  }
  if (mismatch && alignment == StepAlignment::kRequireEqual) {
    throw StepCountMismatchError(
        "summaries cover different step counts; request truncation to "
        "compare");
  }
  if (common < 1) {
    throw EmptyInputError("no common steps to compare");
  }

  ComparisonReport report;
  report.steps_used = common;
  report.truncated = mismatch;

  for (const RunSummary& s : summaries) {
    report.run_ids.push_back(s.run_id);
    const std::span<const metrics::ConsistencyMetrics> window(
        s.series.data(), static_cast<size_t>(common));
    report.means.push_back(metric_means(window));
  }

  const RunSummary& base = summaries[0];
  for (const RunSummary& s : summaries) {
    double worst = 0.0;
    for (int64_t t = 0; t < common; ++t) {
      worst = std::max(worst, std::abs(s.series[t].mean_loss -
                                       base.series[t].mean_loss));
    }
    report.masking_indicator.push_back(worst);
  }

  // Ascending-by-mean ordering per statistic, ties broken by run id so the
  // result does not depend on input order.
  const auto order_by = [&](auto pick) {
    std::vector<size_t> idx(summaries.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      const double va = pick(report.means[a]);
      const double vb = pick(report.means[b]);
      if (va != vb) return va < vb;
      return report.run_ids[a] < report.run_ids[b];
    });
    std::vector<std::string> names;
    for (size_t i : idx) names.push_back(report.run_ids[i]);
    return names;
  };
  report.ordering.push_back(order_by([](const MetricMeans& m) { return m.mean_loss; }));
  report.ordering.push_back(
      order_by([](const MetricMeans& m) { return m.loss_dispersion; }));
  report.ordering.push_back(
      order_by([](const MetricMeans& m) { return m.loss_range; }));
  report.ordering.push_back(
      order_by([](const MetricMeans& m) { return m.mean_grad_norm; }));
  report.ordering.push_back(
      order_by([](const MetricMeans& m) { return m.grad_norm_dispersion; }));
  report.ordering.push_back(
      order_by([](const MetricMeans& m) { return m.grad_norm_range; }));
  report.ordering.push_back(order_by([](const MetricMeans& m) {
    return m.direction_consistency.value_or(
        -std::numeric_limits<double>::infinity());
  }));
  return report;
}

std::string report_csv(const ComparisonReport& report) {
  std::string out =
      "run_id,steps_used,mean_loss,loss_dispersion,loss_range,mean_grad_norm,"
      "grad_norm_dispersion,grad_norm_range,direction_consistency,"
      "masking_indicator\n";
  for (size_t r = 0; r < report.run_ids.size(); ++r) {
    const MetricMeans& m = report.means[r];
    out += report.run_ids[r];
    out += ',';
    out += std::to_string(report.steps_used);
    out += ',';
    out += format_double(m.mean_loss);
    out += ',';
    out += format_double(m.loss_dispersion);
    out += ',';
    out += format_double(m.loss_range);
    out += ',';
    out += format_double(m.mean_grad_norm);
    out += ',';
    out += format_double(m.grad_norm_dispersion);
    out += ',';
    out += format_double(m.grad_norm_range);
    out += ',';
    if (m.direction_consistency) out += format_double(*m.direction_consistency);
    out += ',';
    out += format_double(report.masking_indicator[r]);
    out += '\n';
  }
  return out;
}

void write_report_csv(const ComparisonReport& report,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open report for writing: " + path.string());
  out << report_csv(report);
  out.flush();
  if (!out) throw IoError("failed writing report: " + path.string());
}

std::string report_table(const ComparisonReport& report) {
  std::ostringstream out;
  char buf[160];

  std::snprintf(buf, sizeof(buf), "%-18s %12s %12s %12s %12s %12s %12s %12s %12s\n",
                "run", "mean_loss", "loss_disp", "loss_range", "g_norm",
                "g_norm_disp", "g_norm_rng", "dir_cons", "masking");
  out << buf;
  for (size_t r = 0; r < report.run_ids.size(); ++r) {
    const MetricMeans& m = report.means[r];
    char dir[24];
    if (m.direction_consistency) {
      std::snprintf(dir, sizeof(dir), "%12.6g", *m.direction_consistency);
    } else {
      std::snprintf(dir, sizeof(dir), "%12s", "-");
    }
    std::snprintf(buf, sizeof(buf),
                  "%-18s %12.6g %12.6g %12.6g %12.6g %12.6g %12.6g %s %12.6g\n",
                  report.run_ids[r].c_str(), m.mean_loss, m.loss_dispersion,
                  m.loss_range, m.mean_grad_norm, m.grad_norm_dispersion,
                  m.grad_norm_range, dir, report.masking_indicator[r]);
    out << buf;
  }

  out << "steps compared: " << report.steps_used;
  if (report.truncated) out << " (truncated to shortest run)";
  out << '\n';

  out << "ascending order per statistic:\n";
  for (size_t i = 0; i < report.ordering.size(); ++i) {
    out << "  " << kComparedMetricNames[i] << ":";
    for (const std::string& name : report.ordering[i]) out << ' ' << name;
    out << '\n';
  }
  return out.str();
}

}  // namespace dpdiag::telemetry
