#include "seqrec/data/cache.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "seqrec/errors.hpp"

namespace seqrec::data {
namespace {

using nlohmann::json;

json holdouts_to_json(const std::vector<Holdout>& list) {
  json out = json::array();
  for (const auto& h : list) out.push_back({{"user", h.user}, {"history", h.history}, {"target", h.target}});
  return out;
}

std::vector<Holdout> holdouts_from_json(const json& list) {
  std::vector<Holdout> out;
  for (const auto& h : list) {
    out.push_back({h.at("user").get<std::string>(), h.at("history").get<std::vector<Index>>(),
                   h.at("target").get<Index>()});
  }
  return out;
}

json body_json(const SequenceDataset& ds) {
  json train = json::array();
  for (std::size_t u = 0; u < ds.train.size(); ++u) {
    train.push_back({{"user", ds.train_users[u]}, {"items", ds.train[u]}});
  }
  return {{"format", "seqrec-dataset"},
          {"version", kDatasetFormatVersion},
          {"catalog_size", ds.catalog_size},
          {"split_timestamp", ds.split_timestamp},
          {"item_ids", ds.item_ids},
          {"train", std::move(train)},
          {"validation", holdouts_to_json(ds.validation)},
          {"test", holdouts_to_json(ds.test)}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string dataset_digest(const SequenceDataset& dataset) {
  return hex64(fnv1a64(body_json(dataset).dump()));
}

std::string save_dataset(const std::filesystem::path& path, const SequenceDataset& dataset,
                         const std::string& meta_json) {
  json doc = body_json(dataset);
  const std::string digest = hex64(fnv1a64(doc.dump()));
  doc["digest"] = digest;
  doc["meta"] = json::parse(meta_json);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset cache " + path.string());
  out << doc.dump() << '\n';
  return digest;
}

SequenceDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset cache " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("dataset cache " + path.string() + " is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "seqrec-dataset") {
    throw DataError(path.string() + " is not a seqrec dataset cache");
  }
  if (doc.value("version", 0) != kDatasetFormatVersion) {
    throw DataError("unsupported dataset cache version in " + path.string());
  }
  SequenceDataset ds;
  ds.catalog_size = doc.at("catalog_size").get<std::size_t>();
  ds.split_timestamp = doc.at("split_timestamp").get<std::int64_t>();
  ds.item_ids = doc.at("item_ids").get<std::vector<std::string>>();
  for (const auto& row : doc.at("train")) {
    ds.train_users.push_back(row.at("user").get<std::string>());
    ds.train.push_back(row.at("items").get<std::vector<Index>>());
  }
  ds.validation = holdouts_from_json(doc.at("validation"));
  ds.test = holdouts_from_json(doc.at("test"));
  if (dataset_digest(ds) != doc.value("digest", "")) {
    throw DataError("digest mismatch in " + path.string() + "; the cache was modified");
  }
  return ds;
}

}  // namespace seqrec::data
