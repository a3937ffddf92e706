#pragma once

// Preprocessed dataset sidecar: a JSON document
//   { "format": "seqrec-dataset", "version": 1, "digest": "<16 hex>",
//     "catalog_size": C, "split_timestamp": T, "item_ids": [...],
//     "train": [{"user": u, "items": [...]}, ...],
//     "validation": [{"user": u, "history": [...], "target": c}, ...],
//     "test": [...], "meta": {...} }
// The digest is FNV-1a 64 over the compact dump of everything except
// "digest" and "meta".

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "seqrec/data/split.hpp"

namespace seqrec::data {

inline constexpr int kDatasetFormatVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string dataset_digest(const SequenceDataset& dataset);

// meta_json is an optional JSON object text stored verbatim under "meta".
std::string save_dataset(const std::filesystem::path& path, const SequenceDataset& dataset,
                         const std::string& meta_json = "{}");
// Throws DataError on a wrong format tag, unknown version or digest mismatch.
SequenceDataset load_dataset(const std::filesystem::path& path);

}  // namespace seqrec::data
