#pragma once

// Grid sweeps with a per-config result cache and Pareto extraction.
//
// Grid file:
//   { "name": "...", "version": 1,
//     "base": { <TrainConfig JSON> },
//     "axes": { "loss": ["ce", "sce"], "batch_size": [64, 128],
//               "negatives": [16, 64], "sce.bucket_y": [128, 256] },
//     "extra": [ { <overrides> }, ... ] }
// Every combination of axis values (dotted keys address nested fields) is
// applied to the base; "extra" entries are applied one at a time. Configs
// with equal canonical JSON are run once.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "seqrec/data/split.hpp"
#include "seqrec/harness/config.hpp"
#include "seqrec/harness/pareto.hpp"

namespace seqrec::harness {

struct SweepGrid {
  std::string name;
  std::vector<TrainConfig> configs;
};

SweepGrid parse_grid(const nlohmann::json& grid);
SweepGrid load_grid(const std::filesystem::path& path);

struct RunOutcome {
  std::int64_t peak_bytes = 0;
  double seconds = 0.0;
  eval::MetricsReport metrics;
  std::size_t parameter_count = 0;
  // Loss-specific settings actually used, e.g. "k=64" or "nb=169;bx=39;by=250;mix=1".
  std::string params;
};

struct SweepRow {
  std::string config_id;
  TrainConfig config;
  bool ok = false;
  std::string error;
  RunOutcome outcome;
};

using Runner = std::function<RunOutcome(const TrainConfig&)>;

// Trains on the dataset and reports the measured peak step bytes.
Runner training_runner(const data::SequenceDataset& dataset);

struct SweepOptions {
  // Completed runs are stored as <cache_dir>/<config_id>.json and reused.
  std::filesystem::path cache_dir;
  Runner runner;
  std::function<void(const SweepRow&, bool cached)> on_row;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<ParetoPoint> front;
};

// Failed runs are recorded with their error and the sweep continues; they
// take no part in the front.
SweepResult run_sweep(const SweepGrid& grid, const SweepOptions& options);

std::vector<ParetoPoint> points_of(const std::vector<SweepRow>& rows);

// config_id,loss,s,l,params,peak_bytes,seconds,ndcg@1,ndcg@5,ndcg@10,hr@5,hr@10,cov@1,cov@5,cov@10
std::string results_csv(const std::vector<SweepRow>& rows);
nlohmann::json results_json(const SweepResult& result);
// Writes results.csv, results.json, front.csv and front.json.
void write_sweep_outputs(const std::filesystem::path& dir, const SweepResult& result);

}  // namespace seqrec::harness
