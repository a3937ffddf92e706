// Command-line front end: prepare, synth, train, evaluate, estimate-mem,
// sweep, diagnose.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <malloc.h>
#include <optional>
#include <sstream>
#include <string>

#include "seqrec/backbone/checkpoint.hpp"
#include "seqrec/data/cache.hpp"
#include "seqrec/data/interactions.hpp"
#include "seqrec/data/synthetic.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/eval/evaluator.hpp"
#include "seqrec/harness/config.hpp"
#include "seqrec/harness/logging.hpp"
#include "seqrec/harness/memory_estimate.hpp"
#include "seqrec/harness/sweep.hpp"
#include "seqrec/harness/trainer.hpp"
#include "seqrec/sce/params.hpp"

namespace {

using namespace seqrec;
using nlohmann::json;

// Flags shared by train, diagnose and sweep. Unset flags leave the config
// file (or defaults) alone.
struct ConfigFlags {
  std::string config_file;
  std::optional<std::string> loss;
  std::optional<std::size_t> negatives, n_buckets, bucket_x, bucket_y, s, l, epochs, patience, dim,
      layers, heads;
  std::optional<double> alpha, beta, lr, weight_decay, dropout;
  std::optional<std::uint64_t> seed;
  bool no_mix = false, untied = false, keep_history = false;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "TrainConfig JSON file")->check(CLI::ExistingFile);
    app->add_option("--loss", loss, "ce | bce | bce_plus | ce_minus | sce");
    app->add_option("--negatives,-k", negatives, "negatives per position (bce_plus, ce_minus)");
    app->add_option("--alpha", alpha, "SCE oversampling coefficient");
    app->add_option("--beta", beta, "SCE bucket shape ratio n_b / b_x");
    app->add_option("--n-buckets", n_buckets, "SCE bucket count (disables derivation)");
    app->add_option("--bucket-x", bucket_x, "SCE outputs per bucket (disables derivation)");
    app->add_option("--bucket-y", bucket_y, "SCE catalog items per bucket");
    app->add_flag("--no-mix", no_mix, "random bucket centers instead of Mix");
    app->add_option("--s,--batch-size", s, "batch size");
    app->add_option("--l,--seq-len", l, "sequence length");
    app->add_option("--epochs", epochs, "maximum epochs");
    app->add_option("--patience", patience, "early-stopping patience in epochs");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--weight-decay", weight_decay, "decoupled weight decay");
    app->add_option("--dim", dim, "embedding width");
    app->add_option("--layers", layers, "transformer layers");
    app->add_option("--heads", heads, "attention heads");
    app->add_option("--dropout", dropout, "dropout rate");
    app->add_flag("--untied", untied, "separate output matrix instead of the item table");
    app->add_flag("--keep-history", keep_history, "do not exclude seen items when ranking");
    app->add_option("--seed", seed, "seed for every random stream");
  }

  harness::TrainConfig build() const {
    harness::TrainConfig c;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      c = harness::config_from_json(json::parse(in));
    }
    if (loss) c.loss = harness::parse_loss(*loss);
    if (negatives) c.negatives = *negatives;
    if (alpha) c.sce.alpha = *alpha;
    if (beta) c.sce.beta = *beta;
    if (n_buckets || bucket_x) {
      c.derive_buckets = false;
      if (n_buckets) c.sce.n_buckets = *n_buckets;
      if (bucket_x) c.sce.bucket_x = *bucket_x;
    }
    if (bucket_y) c.sce.bucket_y = *bucket_y;
    if (no_mix) c.sce.use_mix = false;
    if (s) c.batch_size = *s;
    if (l) c.seq_len = *l;
    if (epochs) c.max_epochs = *epochs;
    if (patience) c.patience = *patience;
    if (lr) c.optimizer.lr = *lr;
    if (weight_decay) c.optimizer.weight_decay = *weight_decay;
    if (dim) c.backbone.dim = *dim;
    if (layers) c.backbone.n_layers = *layers;
    if (heads) c.backbone.n_heads = *heads;
    if (dropout) c.backbone.dropout = *dropout;
    if (untied) c.backbone.tied = false;
    if (keep_history) c.exclude_history = false;
    if (seed) c.seed = *seed;
    return c;
  }
};

void print_report(const std::string& title, const eval::MetricsReport& r) {
  std::printf("%s (%zu users)\n", title.c_str(), r.n_users);
  for (std::size_t i = 0; i < eval::kCutoffs.size(); ++i) {
    std::printf("  @%-2zu  ndcg %.4f  hr %.4f  cov %.4f\n", eval::kCutoffs[i], r.ndcg[i], r.hr[i],
                r.cov[i]);
  }
}

int cmd_prepare(const std::string& input, const std::string& out, const data::LoadOptions& load,
                const data::FilterOptions& filter, bool skip_filter,
                const data::SplitOptions& split) {
  auto log = data::load_interactions(input, load);
  const std::size_t raw = log.records.size();
  if (!skip_filter) log = data::p_core_filter(log, filter);
  auto ds = data::temporal_split(log, split);
  json meta{{"source", input},
            {"raw_records", raw},
            {"malformed_lines", log.malformed_lines},
            {"filtered_records", log.records.size()},
            {"min_item_interactions", skip_filter ? 0 : filter.min_item_interactions},
            {"min_user_interactions", skip_filter ? 0 : filter.min_user_interactions},
            {"quantile", split.quantile},
            {"protocol", split.protocol == data::SplitProtocol::kTemporal ? "temporal" : "leave_one_out"}};
  const std::string digest = data::save_dataset(out, ds, meta.dump());
  std::printf("records %zu -> %zu, catalog %zu, train users %zu, validation %zu, test %zu\n", raw,
              log.records.size(), ds.catalog_size, ds.train.size(), ds.validation.size(),
              ds.test.size());
  std::printf("split timestamp %lld, mean train length %.3f\n",
              static_cast<long long>(ds.split_timestamp), ds.mean_train_length());
  std::printf("digest %s -> %s\n", digest.c_str(), out.c_str());
  return 0;
}

int cmd_train(const harness::TrainConfig& config, const std::string& data_path,
              const std::string& out_dir) {
  auto ds = data::load_dataset(data_path);
  std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  harness::TrainHooks hooks;
  hooks.epoch_log = dir / "epochs.jsonl";
  hooks.step_log = dir / "steps.jsonl";
  hooks.checkpoint = dir / "checkpoint.json";
  hooks.divergence_dump = dir / "divergence.json";
  hooks.on_epoch = [](const harness::EpochRecord& e) {
    std::printf("epoch %3zu  loss %.5f", e.epoch, e.train_loss);
    if (e.validation) std::printf("  val ndcg@10 %.4f%s", e.validation->ndcg_at(10), e.improved ? " *" : "");
    std::printf("  (%.1fs)\n", e.seconds);
    std::fflush(stdout);
  };
  if (config.loss == harness::LossKind::kSce) {
    auto r = harness::resolve_sce(config, ds.mean_train_length(), ds.catalog_size);
    std::printf("sce: n_buckets %zu, bucket_x %zu, bucket_y %zu, mix %s\n", r.n_buckets, r.bucket_x,
                r.bucket_y, r.use_mix ? "on" : "off");
  }
  auto result = harness::train(config, ds, hooks);
  print_report("test", result.test);
  json summary{{"config", harness::to_json(config)},
               {"config_id", harness::config_id(config)},
               {"best_epoch", result.best_epoch},
               {"epochs_run", result.epochs.size()},
               {"stopped_early", result.stopped_early},
               {"steps", result.steps},
               {"train_seconds", result.train_seconds},
               {"seconds_per_epoch", result.train_seconds / static_cast<double>(result.epochs.size())},
               {"peak_step_bytes", result.peak_step_bytes},
               {"loss_estimate", harness::estimate_to_json(result.loss_estimate)},
               {"test", eval::report_to_json(result.test)}};
  harness::write_atomically(dir / "metrics.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& checkpoint, bool validation,
                 bool keep_history, bool as_json) {
  auto ds = data::load_dataset(data_path);
  auto model = backbone::load_checkpoint(checkpoint);
  eval::EvalOptions opts;
  opts.exclude_history = !keep_history;
  opts.seq_len = model.config().max_len;
  auto res = eval::evaluate(model, validation ? ds.validation : ds.test, opts);
  if (as_json) {
    std::printf("%s\n", eval::report_to_json(res.report).dump(2).c_str());
  } else {
    print_report(validation ? "validation" : "test", res.report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large logit buffers on the heap instead of fresh mmaps every step.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Sequential recommendation training with scalable cross-entropy"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "ingest, filter, split and cache an interaction log");
  std::string prep_in, prep_out, prep_protocol = "temporal";
  data::LoadOptions load;
  data::FilterOptions filter;
  data::SplitOptions split;
  std::string delimiter;
  std::vector<std::size_t> columns;
  bool no_header_detect = false, skip_filter = false;
  prepare->add_option("--input", prep_in, "CSV or TSV with user, item, timestamp")->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", prep_out, "dataset cache (JSON)")->required();
  prepare->add_option("--delimiter", delimiter, "',' or 'tab' (default: from extension)");
  prepare->add_option("--columns", columns, "column positions of user item timestamp")->expected(3);
  prepare->add_flag("--no-header-detect", no_header_detect, "treat the first line as data");
  prepare->add_option("--max-malformed", load.max_malformed_fraction, "tolerated malformed fraction");
  prepare->add_flag("--dedup", load.dedup, "drop repeated (user, item, timestamp) rows");
  prepare->add_option("--min-item", filter.min_item_interactions, "minimum interactions per item");
  prepare->add_option("--min-user", filter.min_user_interactions, "minimum interactions per user");
  prepare->add_flag("--fixpoint", filter.until_fixpoint, "repeat filtering until stable");
  prepare->add_flag("--no-filter", skip_filter, "skip p-core filtering");
  prepare->add_option("--quantile", split.quantile, "global split quantile");
  prepare->add_option("--protocol", prep_protocol, "temporal | leave_one_out")
      ->check(CLI::IsMember({"temporal", "leave_one_out"}));

  // synth
  auto* synth = app.add_subcommand("synth", "write a planted-structure synthetic log");
  data::PlantedConfig planted;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output CSV")->required();
  synth->add_option("--catalog", planted.catalog_size, "items");
  synth->add_option("--users", planted.users, "users");
  synth->add_option("--cluster", planted.cluster_size, "items per cluster");
  synth->add_option("--follow", planted.follow_prob, "probability of following the planted chain");
  synth->add_option("--min-len", planted.min_length, "shortest sequence");
  synth->add_option("--max-len", planted.max_length, "longest sequence");
  synth->add_option("--seed", planted.seed, "seed");

  // train
  auto* train = app.add_subcommand("train", "train a model and report test metrics");
  ConfigFlags train_flags;
  std::string train_data, train_out = "run";
  train_flags.add(train);
  train->add_option("--data", train_data, "dataset cache from prepare")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "output directory for logs, checkpoint and metrics");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  std::string ev_data, ev_ckpt;
  bool ev_val = false, ev_keep = false, ev_json = false;
  evaluate->add_option("--data", ev_data, "dataset cache")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--checkpoint", ev_ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_flag("--validation", ev_val, "use validation holdouts instead of test");
  evaluate->add_flag("--keep-history", ev_keep, "do not exclude seen items");
  evaluate->add_flag("--json", ev_json, "print the report as JSON");

  // estimate-mem
  auto* estimate = app.add_subcommand("estimate-mem", "analytic logit memory of one training step");
  std::string em_loss = "ce";
  std::size_t em_s = 128, em_l = 200, em_c = 0, em_d = 64, em_k = 1, em_nb = 0, em_bx = 0, em_by = 0;
  double em_alpha = 2.0, em_beta = 1.0, em_mean = 0.0;
  bool em_measure = false, em_json = false;
  estimate->add_option("--loss", em_loss, "ce | bce | bce_plus | ce_minus | sce");
  estimate->add_option("--s", em_s, "batch size");
  estimate->add_option("--l", em_l, "sequence length");
  estimate->add_option("--C", em_c, "catalog size")->required();
  estimate->add_option("--d", em_d, "embedding width");
  estimate->add_option("--negatives,-k", em_k, "negatives per position");
  estimate->add_option("--n-buckets", em_nb, "SCE buckets (default: derived)");
  estimate->add_option("--bucket-x", em_bx, "SCE outputs per bucket (default: derived)");
  estimate->add_option("--bucket-y", em_by, "SCE items per bucket");
  estimate->add_option("--alpha", em_alpha, "SCE alpha");
  estimate->add_option("--beta", em_beta, "SCE beta");
  estimate->add_option("--mean-len", em_mean, "mean sequence length for derivation (default l)");
  estimate->add_flag("--measure", em_measure, "also run the loss once under the counting allocator");
  estimate->add_flag("--json", em_json, "print JSON");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a config grid and extract the Pareto front");
  std::string sw_grid, sw_data, sw_out = "sweep", sw_cache;
  sweep->add_option("--grid", sw_grid, "grid JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--data", sw_data, "dataset cache")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sw_out, "output directory");
  sweep->add_option("--cache", sw_cache, "result cache directory (default: <out>/cache)");

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "per-step SCE selection diagnostics (CSV)");
  ConfigFlags diag_flags;
  std::string dg_data, dg_out;
  std::size_t dg_steps = 200;
  bool dg_both = false;
  diag_flags.add(diagnose);
  diagnose->add_option("--data", dg_data, "dataset cache")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--steps", dg_steps, "training steps to record");
  diagnose->add_option("--out", dg_out, "CSV path (default: stdout)");
  diagnose->add_flag("--both", dg_both, "record with and without Mix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      if (delimiter == "tab" || delimiter == "\\t") load.delimiter = '\t';
      else if (!delimiter.empty()) load.delimiter = delimiter[0];
      if (!columns.empty()) load.columns = {columns[0], columns[1], columns[2]};
      load.detect_header = !no_header_detect;
      split.protocol = prep_protocol == "temporal" ? data::SplitProtocol::kTemporal
                                                   : data::SplitProtocol::kLeaveOneOut;
      return cmd_prepare(prep_in, prep_out, load, filter, skip_filter, split);
    }
    if (synth->parsed()) {
      auto log = data::make_planted_log(planted);
      data::write_interactions(synth_out, log);
      std::printf("%zu interactions -> %s\n", log.records.size(), synth_out.c_str());
      return 0;
    }
    if (train->parsed()) return cmd_train(train_flags.build(), train_data, train_out);
    if (evaluate->parsed()) return cmd_evaluate(ev_data, ev_ckpt, ev_val, ev_keep, ev_json);
    if (estimate->parsed()) {
      harness::LossSpec spec;
      spec.kind = harness::parse_loss(em_loss);
      spec.negatives = em_k;
      if (spec.kind == harness::LossKind::kSce) {
        auto p = sce::derive_bucket_params(em_s, em_l, em_mean > 0 ? em_mean : double(em_l), em_alpha, em_beta);
        spec.sce.n_buckets = em_nb ? em_nb : p.n_buckets;
        spec.sce.bucket_x = em_bx ? em_bx : p.bucket_x;
        spec.sce.bucket_y = em_by ? em_by : std::max<std::size_t>(1, em_c / 8);
      }
      auto e = harness::estimate_memory(spec, em_s, em_l, em_c, em_d);
      if (em_measure) e.measured_peak_bytes = harness::measure_loss_peak_bytes(spec, em_s, em_l, em_c, em_d, 0);
      if (em_json) {
        std::printf("%s\n", harness::estimate_to_json(e).dump(2).c_str());
        return 0;
      }
      std::printf("%s logits: %zu elements = %s\n", std::string(harness::loss_name(spec.kind)).c_str(),
                  e.logits_elements, harness::format_bytes(double(e.logits_bytes())).c_str());
      if (spec.kind == harness::LossKind::kSce) {
        std::printf("  n_buckets %zu, bucket_x %zu, bucket_y %zu\n", spec.sce.n_buckets,
                    spec.sce.bucket_x, spec.sce.bucket_y);
      }
      std::printf("auxiliary: %zu elements = %s\n", e.auxiliary_elements,
                  harness::format_bytes(double(e.auxiliary_bytes())).c_str());
      std::printf("total: %s\n", harness::format_bytes(double(e.total_bytes())).c_str());
      if (e.measured_peak_bytes) {
        std::printf("measured peak: %s\n", harness::format_bytes(double(*e.measured_peak_bytes)).c_str());
      }
      return 0;
    }
    if (sweep->parsed()) {
      auto ds = data::load_dataset(sw_data);
      auto grid = harness::load_grid(sw_grid);
      harness::SweepOptions opts;
      opts.cache_dir = sw_cache.empty() ? std::filesystem::path(sw_out) / "cache" : std::filesystem::path(sw_cache);
      opts.runner = harness::training_runner(ds);
      opts.on_row = [](const harness::SweepRow& r, bool cached) {
        if (r.ok) {
          std::printf("%s %-8s %s ndcg@10 %.4f peak %s%s\n", r.config_id.c_str(),
                      std::string(harness::loss_name(r.config.loss)).c_str(), r.outcome.params.c_str(),
                      r.outcome.metrics.ndcg_at(10), harness::format_bytes(double(r.outcome.peak_bytes)).c_str(),
                      cached ? " (cached)" : "");
        } else {
          std::printf("%s failed: %s\n", r.config_id.c_str(), r.error.c_str());
        }
        std::fflush(stdout);
      };
      std::printf("sweep '%s': %zu configs\n", grid.name.c_str(), grid.configs.size());
      auto result = harness::run_sweep(grid, opts);
      harness::write_sweep_outputs(sw_out, result);
      std::printf("front: %zu of %zu points -> %s\n", result.front.size(), result.rows.size(), sw_out.c_str());
      return 0;
    }
    if (diagnose->parsed()) {
      auto ds = data::load_dataset(dg_data);
      auto base = diag_flags.build();
      base.loss = harness::LossKind::kSce;
      if (base.sce.bucket_y == 0) base.sce.bucket_y = std::max<std::size_t>(1, ds.catalog_size / 8);
      std::vector<bool> modes{base.sce.use_mix};
      if (dg_both) modes = {true, false};
      std::ostringstream csv;
      csv << "mix,step,loss,unique_selection_fraction,correct_logit_fraction\n";
      for (bool mix : modes) {
        auto cfg = base;
        cfg.sce.use_mix = mix;
        cfg.max_epochs = std::max<std::size_t>(cfg.max_epochs, dg_steps);
        harness::TrainHooks hooks;
        hooks.max_steps = dg_steps;
        hooks.skip_evaluation = true;
        hooks.on_step = [&](const harness::StepRecord& r) {
          csv << (mix ? 1 : 0) << ',' << r.step << ',' << r.loss << ','
              << r.unique_selection_fraction.value_or(0.0) << ','
              << r.correct_logit_fraction.value_or(0.0) << '\n';
        };
        harness::train(cfg, ds, hooks);
      }
      if (dg_out.empty()) {
        std::cout << csv.str();
      } else {
        harness::write_atomically(dg_out, csv.str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
