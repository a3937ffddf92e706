#pragma once

// Checkpoint layout (JSON):
//   { "format": "seqrec-checkpoint", "version": 1,
//     "config": { "dim", "n_layers", "n_heads", "max_len", "catalog_size",
//                 "dropout", "tied" },
//     "arrays": [ { "name": "item_table", "shape": [C+1, d], "data": [...] }, ... ],
//     "meta": { ... } }
// Arrays appear in Model::parameters() order; values are written with
// round-trip precision.

#include <filesystem>
#include <json.hpp>
#include <vector>

#include "seqrec/backbone/model.hpp"

namespace seqrec::backbone {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const BackboneConfig& config);
BackboneConfig config_from_json(const nlohmann::json& j, BackboneConfig base = {});

using Snapshot = std::vector<std::vector<Real>>;
// Copies of every parameter's values, and the inverse.
Snapshot snapshot(const Model& model);
void restore(Model& model, const Snapshot& snap);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& meta = nlohmann::json::object());
// Throws DataError on a format, version or shape mismatch.
Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace seqrec::backbone
