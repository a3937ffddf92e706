#include "seqrec/harness/config.hpp"

#include <algorithm>
#include <cstdio>

#include "seqrec/backbone/checkpoint.hpp"
#include "seqrec/data/cache.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/sce/params.hpp"

namespace seqrec::harness {

using nlohmann::json;

std::string_view loss_name(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kCe: return "ce";
    case LossKind::kBce: return "bce";
    case LossKind::kBcePlus: return "bce_plus";
    case LossKind::kCeMinus: return "ce_minus";
    case LossKind::kSce: return "sce";
  }
  return "?";
}

LossKind parse_loss(std::string_view name) {
  if (name == "ce" || name == "full_ce") return LossKind::kCe;
  if (name == "bce") return LossKind::kBce;
  if (name == "bce_plus" || name == "bce+") return LossKind::kBcePlus;
  if (name == "ce_minus" || name == "ce-") return LossKind::kCeMinus;
  if (name == "sce") return LossKind::kSce;
  throw ParameterError("unknown loss '" + std::string(name) +
                       "' (expected ce, bce, bce_plus, ce_minus or sce)");
}

void TrainConfig::validate() const {
  if (batch_size == 0 || seq_len == 0 || max_epochs == 0 || eval_batch_size == 0) {
    throw ParameterError("batch_size, seq_len, max_epochs and eval_batch_size must be >= 1");
  }
  if ((loss == LossKind::kBcePlus || loss == LossKind::kCeMinus) && negatives == 0) {
    throw ParameterError("sampled losses need negatives >= 1");
  }
  if (loss == LossKind::kSce) {
    if (sce.bucket_y == 0) throw ParameterError("sce needs bucket_y >= 1");
    if (!derive_buckets && (sce.n_buckets == 0 || sce.bucket_x == 0)) {
      throw ParameterError("sce without derive needs n_buckets and bucket_x >= 1");
    }
    if (!(sce.alpha > 0.0) || !(sce.beta > 0.0)) throw ParameterError("sce alpha and beta must be > 0");
  }
  if (!(optimizer.lr > 0.0) || optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 ||
      optimizer.beta2 < 0.0 || optimizer.beta2 >= 1.0 || !(optimizer.eps > 0.0) ||
      optimizer.weight_decay < 0.0) {
    throw ParameterError("optimizer settings out of range");
  }
  auto bb = backbone;
  bb.catalog_size = std::max<std::size_t>(bb.catalog_size, 1);
  bb.max_len = seq_len;
  bb.validate();
}

json to_json(const TrainConfig& c) {
  json bb = backbone::config_to_json(c.backbone);
  bb.erase("catalog_size");
  bb.erase("max_len");
  return {{"loss", loss_name(c.loss)},
          {"negatives", c.negatives},
          {"sce",
           {{"n_buckets", c.sce.n_buckets},
            {"bucket_x", c.sce.bucket_x},
            {"bucket_y", c.sce.bucket_y},
            {"use_mix", c.sce.use_mix},
            {"mix_catalog", c.sce.mix_catalog},
            {"alpha", c.sce.alpha},
            {"beta", c.sce.beta},
            {"derive", c.derive_buckets}}},
          {"backbone", std::move(bb)},
          {"optimizer",
           {{"lr", c.optimizer.lr},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"eps", c.optimizer.eps},
            {"weight_decay", c.optimizer.weight_decay}}},
          {"batch_size", c.batch_size},
          {"seq_len", c.seq_len},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"exclude_history", c.exclude_history},
          {"eval_batch_size", c.eval_batch_size}};
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ParameterError("train config must be a JSON object");
  if (j.contains("loss")) c.loss = parse_loss(j.at("loss").get<std::string>());
  c.negatives = j.value("negatives", c.negatives);
  if (j.contains("sce")) {
    const auto& s = j.at("sce");
    c.sce.n_buckets = s.value("n_buckets", c.sce.n_buckets);
    c.sce.bucket_x = s.value("bucket_x", c.sce.bucket_x);
    c.sce.bucket_y = s.value("bucket_y", c.sce.bucket_y);
    c.sce.use_mix = s.value("use_mix", c.sce.use_mix);
    c.sce.mix_catalog = s.value("mix_catalog", c.sce.mix_catalog);
    c.sce.alpha = s.value("alpha", c.sce.alpha);
    c.sce.beta = s.value("beta", c.sce.beta);
    c.derive_buckets = s.value("derive", c.derive_buckets);
  }
  if (j.contains("backbone")) c.backbone = backbone::config_from_json(j.at("backbone"), c.backbone);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.lr = o.value("lr", c.optimizer.lr);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.value("eps", c.optimizer.eps);
    c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.exclude_history = j.value("exclude_history", c.exclude_history);
  c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
  return c;
}

json canonical_json(const TrainConfig& c) {
  json j = to_json(c);
  j.erase("eval_batch_size");
  if (c.loss != LossKind::kBcePlus && c.loss != LossKind::kCeMinus) j.erase("negatives");
  if (c.loss != LossKind::kSce) {
    j.erase("sce");
  } else if (c.derive_buckets) {
    j["sce"].erase("n_buckets");
    j["sce"].erase("bucket_x");
  } else {
    j["sce"].erase("alpha");
    j["sce"].erase("beta");
  }
  return j;
}

std::string config_id(const TrainConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(data::fnv1a64(canonical_json(c).dump())));
  return buf;
}

sce::SceConfig resolve_sce(const TrainConfig& config, double mean_length, std::size_t catalog) {
  sce::SceConfig out = config.sce;
  if (config.derive_buckets) {
    // Sequences longer than l + 1 contribute at most l positions.
    const double len = std::clamp(mean_length, 1.0, static_cast<double>(config.seq_len));
    auto p = sce::derive_bucket_params(config.batch_size, config.seq_len, len, config.sce.alpha,
                                       config.sce.beta);
    out.n_buckets = p.n_buckets;
    out.bucket_x = p.bucket_x;
  }
  out.bucket_y = std::min(out.bucket_y, catalog);
  out.validate();
  return out;
}

}  // namespace seqrec::harness
