#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "seqrec/backbone/model.hpp"
#include "seqrec/data/split.hpp"
#include "seqrec/eval/metrics.hpp"
#include "seqrec/harness/config.hpp"
#include "seqrec/harness/memory_estimate.hpp"

namespace seqrec::harness {

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  Real loss = 0.0;
  std::optional<Real> unique_selection_fraction;
  std::optional<Real> correct_logit_fraction;
  // Transient tensor bytes over forward, loss and backward of this step.
  std::int64_t peak_bytes = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  Real train_loss = 0.0;
  std::optional<eval::MetricsReport> validation;
  double seconds = 0.0;
  bool improved = false;
};

struct TrainHooks {
  std::filesystem::path epoch_log;       // JSONL, one record per epoch
  std::filesystem::path step_log;        // JSONL, one record per step
  std::filesystem::path checkpoint;      // best model, written at the end
  std::filesystem::path divergence_dump; // written before DivergenceError
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  // Stop after this many optimizer steps (0 = no limit).
  std::size_t max_steps = 0;
  // Skip validation and final test evaluation.
  bool skip_evaluation = false;
};

struct TrainResult {
  std::shared_ptr<backbone::Model> model;
  sce::SceConfig resolved_sce;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  Real best_validation_ndcg10 = 0.0;
  bool stopped_early = false;
  std::size_t steps = 0;
  eval::MetricsReport test;
  double train_seconds = 0.0;
  std::int64_t peak_step_bytes = 0;
  MemoryEstimate loss_estimate;
};

LossSpec loss_spec(const TrainConfig& config, const sce::SceConfig& resolved);

// Adam training with per-epoch validation NDCG@10; stops once more than
// `patience` consecutive epochs fail to improve it, then restores the best
// epoch's weights and evaluates on the test holdouts. A non-finite loss
// raises DivergenceError after writing the dump.
TrainResult train(const TrainConfig& config, const data::SequenceDataset& dataset,
                  const TrainHooks& hooks = {});

}  // namespace seqrec::harness
