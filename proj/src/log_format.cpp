#include "dpdiag/log_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dpdiag/rng.hpp"

#include "json.hpp"

namespace dpdiag::telemetry {

using nlohmann::json;

namespace {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

json manifest_to_json(const RunManifest& m) {
  json j;
  j["type"] = "manifest";
  j["schema_version"] = kLogSchemaVersion;
  j["run_id"] = m.run_id;
  j["world_size"] = m.world_size;
  if (m.config) {
    j["config"] = sim::config_to_json(*m.config);
  } else {
    j["config"] = "external";
  }
  j["prng"] = m.prng;
  j["param_order"] = m.param_order;
  j["created_at"] = m.created_at;
  return j;
}

json record_to_json(const RunManifest& m, int64_t step,
                    const metrics::WorkerStepRecord& w) {
  json j;
  j["schema_version"] = kLogSchemaVersion;
  j["run_id"] = m.run_id;
  j["step"] = step;
  j["rank"] = w.rank;
  j["loss"] = w.loss;
  j["grad_norm"] = w.grad_norm;
  if (w.gradient) {
    j["gradient"] = w.gradient->components;
  }
  if (w.sketch) {
    j["sketch"] = {{"projected", w.sketch->projected},
                   {"seed", w.sketch->sketch_seed},
                   {"source_dim", w.sketch->source_dim}};
  }
  return j;
}

double require_finite_number(const json& j, const char* key, size_t line) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw MalformedLineError(line, "line " + std::to_string(line) +
                                       ": missing or non-numeric \"" + key +
                                       "\"");
  }
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) {
    throw MalformedLineError(line, "line " + std::to_string(line) +
                                       ": non-finite \"" + key + "\"");
  }
  return v;
}

}  // namespace

std::string run_id_for_config(const sim::ScenarioConfig& config) {
  return hex64(fnv1a64(sim::config_to_json(config).dump()));
}

void write_log(const RunLog& run, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open log for writing: " + path.string());
  }

  out << manifest_to_json(run.manifest).dump() << '\n';

  // Canonical order regardless of in-memory arrangement.
  std::vector<std::pair<std::pair<int64_t, int>, std::string>> lines;
  for (const metrics::StepSnapshot& snap : run.steps) {
    for (const metrics::WorkerStepRecord& w : snap.workers) {
      lines.emplace_back(std::make_pair(snap.step, w.rank),
                         record_to_json(run.manifest, snap.step, w).dump());
    }
  }
  std::sort(lines.begin(), lines.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [key, line] : lines) {
    out << line << '\n';
  }
  out.flush();
  if (!out) {
    throw IoError("failed writing log: " + path.string());
  }
}

RunLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open log for reading: " + path.string());
  }

  std::string line;
  size_t line_no = 0;

  if (!std::getline(in, line)) {
    throw MalformedLineError(1, "empty log: missing manifest line");
  }
  line_no = 1;

  json mj;
  try {
    mj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedLineError(1, std::string("manifest line: ") + e.what());
  }
  if (!mj.is_object() || mj.value("type", "") != "manifest") {
    throw MalformedLineError(1, "first line must be the manifest");
  }
  if (!mj.contains("schema_version") || !mj["schema_version"].is_number_integer()) {
    throw MalformedLineError(1, "manifest missing schema_version");
  }
  const int version = mj["schema_version"].get<int>();
  if (version != kLogSchemaVersion) {
    throw UnknownSchemaVersionError("unsupported log schema_version " +
                                    std::to_string(version));
  }

  RunLog run;
  try {
    run.manifest.run_id = mj.at("run_id").get<std::string>();
    run.manifest.world_size = mj.at("world_size").get<int>();
    if (mj.at("config").is_string()) {
      if (mj.at("config").get<std::string>() != "external") {
        throw MalformedLineError(1, "manifest config must be an object or \"external\"");
      }
    } else {
      run.manifest.config = sim::config_from_json(mj.at("config"));
    }
    run.manifest.prng = mj.value("prng", "");
    run.manifest.param_order = mj.value("param_order", "");
    run.manifest.created_at = mj.value("created_at", "");
  } catch (const json::exception& e) {
    throw MalformedLineError(1, std::string("manifest line: ") + e.what());
  }
  if (run.manifest.world_size < 1) {
    throw MalformedLineError(1, "manifest world_size must be >= 1");
  }

  std::map<int64_t, std::map<int, metrics::WorkerStepRecord>> by_step;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      throw MalformedLineError(line_no,
                               "line " + std::to_string(line_no) + ": empty");
    }
    json rj;
    try {
      rj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                            ": " + e.what());
    }
    if (!rj.is_object()) {
      throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                            ": record must be an object");
    }
    for (const auto& [key, value] : rj.items()) {
      if (key != "schema_version" && key != "run_id" && key != "step" &&
          key != "rank" && key != "loss" && key != "grad_norm" &&
          key != "gradient" && key != "sketch") {
        throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                              ": unknown key \"" + key + "\"");
      }
    }
    if (!rj.contains("schema_version") ||
        !rj["schema_version"].is_number_integer()) {
      throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                            ": missing schema_version");
    }
    if (rj["schema_version"].get<int>() != kLogSchemaVersion) {
      throw UnknownSchemaVersionError(
          "unsupported record schema_version on line " +
          std::to_string(line_no));
    }
    if (!rj.contains("run_id") || !rj["run_id"].is_string() ||
        rj["run_id"].get<std::string>() != run.manifest.run_id) {
      throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                            ": run_id does not match manifest");
    }
    if (!rj.contains("step") || !rj["step"].is_number_integer()) {
      throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                            ": missing integer step");
    }
    if (!rj.contains("rank") || !rj["rank"].is_number_integer()) {
      throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                            ": missing integer rank");
    }
    const int64_t step = rj["step"].get<int64_t>();
    const int rank = rj["rank"].get<int>();
    if (step < 0) {
      throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                            ": negative step");
    }
    if (rank < 0 || rank >= run.manifest.world_size) {
      throw MalformedLineError(
          line_no, "line " + std::to_string(line_no) + ": rank " +
                       std::to_string(rank) + " outside [0, " +
                       std::to_string(run.manifest.world_size) + ")");
    }

    metrics::WorkerStepRecord record;
    record.rank = rank;
    record.loss = require_finite_number(rj, "loss", line_no);
    record.grad_norm = require_finite_number(rj, "grad_norm", line_no);

    if (rj.contains("gradient") && rj.contains("sketch")) {
      throw MalformedLineError(line_no,
                               "line " + std::to_string(line_no) +
                                   ": record carries both gradient and sketch");
    }
    if (rj.contains("gradient")) {
      if (!rj["gradient"].is_array()) {
        throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                              ": gradient must be an array");
      }
      metrics::GradientVector g;
      g.components = rj["gradient"].get<std::vector<double>>();
      if (!g.is_finite()) {
        throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                              ": non-finite gradient component");
      }
      record.gradient = std::move(g);
    }
    if (rj.contains("sketch")) {
      const json& sj = rj["sketch"];
      if (!sj.is_object() || !sj.contains("projected") ||
          !sj.contains("seed") || !sj.contains("source_dim")) {
        throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                              ": malformed sketch payload");
      }
      for (const auto& [key, value] : sj.items()) {
        if (key != "projected" && key != "seed" && key != "source_dim") {
          throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                                ": unknown sketch key \"" +
                                                key + "\"");
        }
      }
      metrics::GradientSketch s;
      try {
        s.projected = sj["projected"].get<std::vector<double>>();
        s.sketch_seed = sj["seed"].get<uint64_t>();
        s.source_dim = sj["source_dim"].get<int64_t>();
      } catch (const json::exception& e) {
        throw MalformedLineError(line_no, "line " + std::to_string(line_no) +
                                              ": " + e.what());
      }
      record.sketch = std::move(s);
    }

    auto& cell = by_step[step];
    if (cell.count(rank) != 0) {
      throw DuplicateCellError("line " + std::to_string(line_no) +
                               ": duplicate cell (step " +
                               std::to_string(step) + ", rank " +
                               std::to_string(rank) + ")");
    }
    cell.emplace(rank, std::move(record));
  }

  int64_t incomplete = 0;
  for (auto& [step, cells] : by_step) {
    metrics::StepSnapshot snap;
    snap.step = step;
    snap.workers.reserve(cells.size());
    for (auto& [rank, record] : cells) {
      snap.workers.push_back(std::move(record));
    }
    if (!run.step_complete(snap)) ++incomplete;
    run.steps.push_back(std::move(snap));
  }

  // Wholly missing interior steps also count as gaps.
  int64_t missing = 0;
  if (!by_step.empty()) {
    const int64_t lo = by_step.begin()->first;
    const int64_t hi = by_step.rbegin()->first;
    missing = (hi - lo + 1) - static_cast<int64_t>(by_step.size());
  }
  run.gap_steps = incomplete + missing;
  return run;
}

}  // namespace dpdiag::telemetry
