#include "seqrec/harness/trainer.hpp"

#include <chrono>
#include <cmath>

#include "seqrec/backbone/checkpoint.hpp"
#include "seqrec/data/batches.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/eval/evaluator.hpp"
#include "seqrec/harness/logging.hpp"
#include "seqrec/harness/loss_step.hpp"
#include "seqrec/harness/optimizer.hpp"

namespace seqrec::harness {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json step_json(const StepRecord& r) {
  nlohmann::json j{{"step", r.step}, {"epoch", r.epoch}, {"loss", r.loss}, {"peak_bytes", r.peak_bytes}};
  if (r.unique_selection_fraction) j["unique_selection_fraction"] = *r.unique_selection_fraction;
  if (r.correct_logit_fraction) j["correct_logit_fraction"] = *r.correct_logit_fraction;
  return j;
}

}  // namespace

LossSpec loss_spec(const TrainConfig& config, const sce::SceConfig& resolved) {
  return {config.loss, config.negatives, resolved};
}

TrainResult train(const TrainConfig& config_in, const data::SequenceDataset& dataset,
                  const TrainHooks& hooks) {
  TrainConfig config = config_in;
  config.backbone.catalog_size = dataset.catalog_size;
  config.backbone.max_len = config.seq_len;
  config.validate();

  TrainResult result;
  if (config.loss == LossKind::kSce) {
    result.resolved_sce = resolve_sce(config, dataset.mean_train_length(), dataset.catalog_size);
  }
  const LossSpec spec = loss_spec(config, result.resolved_sce);
  result.loss_estimate = estimate_memory(spec, config.batch_size, config.seq_len,
                                         dataset.catalog_size, config.backbone.dim);

  result.model = std::make_shared<backbone::Model>(config.backbone, config.seed);
  backbone::Model& model = *result.model;
  std::vector<num::Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  Adam adam(params, config.optimizer);

  auto shuffle_rng = num::make_rng(config.seed, num::RngStream::kShuffle);
  auto dropout_rng = num::make_rng(config.seed, num::RngStream::kDropout);
  auto loss_rng = num::make_rng(config.seed, num::RngStream::kLoss);
  const eval::EvalOptions eval_options{config.exclude_history, config.eval_batch_size,
                                       config.seq_len};

  JsonlWriter epoch_log, step_log;
  if (!hooks.epoch_log.empty()) epoch_log = JsonlWriter(hooks.epoch_log);
  if (!hooks.step_log.empty()) step_log = JsonlWriter(hooks.step_log);

  const bool validate = !hooks.skip_evaluation && !dataset.validation.empty();
  backbone::Snapshot best = backbone::snapshot(model);
  bool have_best = false;
  std::size_t bad_epochs = 0;
  const auto train_start = Clock::now();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    auto batches = data::make_batches(dataset.train, config.batch_size, config.seq_len, shuffle_rng);
    if (batches.empty()) throw DataError("train: no training sequence has two or more items");
    Real loss_sum = 0.0;
    std::size_t loss_count = 0;
    bool step_limit = false;
    for (const auto& batch : batches) {
      StepRecord rec;
      rec.epoch = epoch;
      {
        num::MemoryProbe probe;
        num::Tensor x = model.forward(batch, dropout_rng, true);
        num::Tensor y = model.catalog();
        LossStep step = compute_loss(spec, x, y, batch.targets, batch.mask, loss_rng);
        rec.loss = step.value.item();
        rec.unique_selection_fraction = step.unique_selection_fraction;
        rec.correct_logit_fraction = step.correct_logit_fraction;
        if (!std::isfinite(rec.loss)) {
          if (!hooks.divergence_dump.empty()) {
            nlohmann::json dump{{"epoch", epoch},
                                {"step", result.steps + 1},
                                {"loss", std::isnan(rec.loss) ? "nan" : "inf"},
                                {"config", to_json(config)},
                                {"epochs", result.epochs.size()}};
            write_atomically(hooks.divergence_dump, dump.dump(2) + "\n");
          }
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(result.steps + 1) +
                                "; try a lower learning rate");
        }
        num::backward(step.value);
        rec.peak_bytes = probe.peak_bytes();
      }
      adam.step();
      adam.zero_grad();
      rec.step = ++result.steps;
      result.peak_step_bytes = std::max(result.peak_step_bytes, rec.peak_bytes);
      loss_sum += rec.loss;
      ++loss_count;
      step_log.write(step_json(rec));
      if (hooks.on_step) hooks.on_step(rec);
      if (hooks.max_steps != 0 && result.steps >= hooks.max_steps) {
        step_limit = true;
        break;
      }
    }

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = loss_sum / static_cast<Real>(loss_count);
    if (validate) {
      er.validation = eval::evaluate(model, dataset.validation, eval_options).report;
      const Real ndcg = er.validation->ndcg_at(10);
      if (!have_best || ndcg > result.best_validation_ndcg10) {
        er.improved = true;
        have_best = true;
        result.best_validation_ndcg10 = ndcg;
        result.best_epoch = epoch;
        best = backbone::snapshot(model);
        bad_epochs = 0;
      } else {
        ++bad_epochs;
      }
    } else {
      er.improved = true;
      result.best_epoch = epoch;
    }
    er.seconds = seconds_since(epoch_start);
    result.epochs.push_back(er);

    nlohmann::json ej{{"epoch", er.epoch},
                      {"train_loss", er.train_loss},
                      {"seconds", er.seconds},
                      {"improved", er.improved}};
    if (er.validation) ej["validation"] = eval::report_to_json(*er.validation);
    epoch_log.write(ej);
    if (hooks.on_epoch) hooks.on_epoch(er);

    if (step_limit) break;
    if (validate && bad_epochs > config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  result.train_seconds = seconds_since(train_start);

  if (validate) backbone::restore(model, best);
  if (!hooks.skip_evaluation) {
    result.test = eval::evaluate(model, dataset.test, eval_options).report;
  }
  if (!hooks.checkpoint.empty()) {
    backbone::save_checkpoint(hooks.checkpoint, model,
                              {{"train_config", to_json(config)},
                               {"best_epoch", result.best_epoch},
                               {"test", eval::report_to_json(result.test)}});
  }
  return result;
}

}  // namespace seqrec::harness
