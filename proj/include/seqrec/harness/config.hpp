#pragma once

// Training configuration and its JSON form.
//
// {
//   "loss": "ce" | "bce" | "bce_plus" | "ce_minus" | "sce",
//   "negatives": k,                          // bce_plus, ce_minus (bce uses 1)
//   "sce": { "n_buckets", "bucket_x", "bucket_y", "use_mix", "mix_catalog",
//            "alpha", "beta", "derive": true },  // derive n_b, b_x from alpha, beta
//   "backbone": { "dim", "n_layers", "n_heads", "dropout", "tied" },
//   "optimizer": { "lr", "beta1", "beta2", "eps", "weight_decay" },
//   "batch_size": s, "seq_len": l, "max_epochs", "patience", "seed",
//   "exclude_history": true, "eval_batch_size": 256
// }
// Missing keys keep their defaults.

#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <string_view>

#include "seqrec/backbone/model.hpp"
#include "seqrec/sce/sce_loss.hpp"

namespace seqrec::harness {

using num::Real;

enum class LossKind { kCe, kBce, kBcePlus, kCeMinus, kSce };

std::string_view loss_name(LossKind kind) noexcept;
// Accepts ce, bce, bce_plus, ce_minus, sce (and bce+ / ce-). Throws
// ParameterError otherwise.
LossKind parse_loss(std::string_view name);

struct OptimizerConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.98;
  Real eps = 1e-8;
  Real weight_decay = 0.0;
};

struct TrainConfig {
  backbone::BackboneConfig backbone;
  LossKind loss = LossKind::kCe;
  std::size_t negatives = 1;
  sce::SceConfig sce{.n_buckets = 0, .bucket_x = 0, .bucket_y = 0};
  bool derive_buckets = true;
  OptimizerConfig optimizer;
  std::size_t batch_size = 128;
  std::size_t seq_len = 200;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool exclude_history = true;
  std::size_t eval_batch_size = 256;

  // Throws ParameterError on inconsistent or non-positive settings.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Only the settings that influence a run of the selected loss, so configs
// that differ in unused fields share an id.
nlohmann::json canonical_json(const TrainConfig& config);
// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_id(const TrainConfig& config);

// SCE bucket sizes for a run: n_b and b_x from alpha and beta when derive
// is set (using the mean training length), b_y clamped to the catalog.
sce::SceConfig resolve_sce(const TrainConfig& config, double mean_length, std::size_t catalog);

}  // namespace seqrec::harness
