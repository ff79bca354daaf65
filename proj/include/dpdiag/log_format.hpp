#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpdiag/metrics.hpp"
#include "dpdiag/scenario.hpp"

namespace dpdiag::telemetry {

inline constexpr int kLogSchemaVersion = 1;

// Identifies the producing configuration of a log. config is absent for
// ingested foreign logs ("external"). created_at is left empty by the
// simulator so that equal configs yield byte-identical files; external
// producers may record a real timestamp.
struct RunManifest {
  std::string run_id;
  int world_size = 0;
  std::optional<sim::ScenarioConfig> config;
  std::string prng;
  std::string param_order;
  std::string created_at;
};

// Ordered per-step snapshots plus the manifest. Snapshots are sorted by
// step, workers within a snapshot by rank; a snapshot is complete when it
// holds one record per rank in [0, world_size).
struct RunLog {
  RunManifest manifest;
  std::vector<metrics::StepSnapshot> steps;
  // Steps excluded from metrics at read time: incomplete rank sets plus
  // wholly missing interior steps.
  int64_t gap_steps = 0;

  bool step_complete(const metrics::StepSnapshot& snap) const {
    return static_cast<int>(snap.workers.size()) == manifest.world_size;
  }
};

// Stable identifier derived from the canonical JSON form of a config.
std::string run_id_for_config(const sim::ScenarioConfig& config);

// Writes one manifest line followed by newline-delimited record lines,
// ordered by (step, rank), UTF-8, floats in round-trip form. Equal RunLogs
// produce byte-identical files.
void write_log(const RunLog& run, const std::filesystem::path& path);

// Parses and validates a log file. Throws UnknownSchemaVersionError,
// MalformedLineError (with line number), or DuplicateCellError. Incomplete
// steps are kept (so a rewrite is lossless) but counted in gap_steps and
// skipped by summarization.
RunLog read_log(const std::filesystem::path& path);

}  // namespace dpdiag::telemetry
