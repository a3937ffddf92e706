#include "seqrec/backbone/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "seqrec/errors.hpp"

namespace seqrec::backbone {

using nlohmann::json;

json config_to_json(const BackboneConfig& c) {
  return {{"dim", c.dim},         {"n_layers", c.n_layers},         {"n_heads", c.n_heads},
          {"max_len", c.max_len}, {"catalog_size", c.catalog_size}, {"dropout", c.dropout},
          {"tied", c.tied}};
}

BackboneConfig config_from_json(const json& j, BackboneConfig c) {
  c.dim = j.value("dim", c.dim);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.max_len = j.value("max_len", c.max_len);
  c.catalog_size = j.value("catalog_size", c.catalog_size);
  c.dropout = j.value("dropout", c.dropout);
  c.tied = j.value("tied", c.tied);
  return c;
}

Snapshot snapshot(const Model& model) {
  Snapshot snap;
  for (const auto& p : model.parameters()) {
    auto v = p.tensor.data();
    snap.emplace_back(v.begin(), v.end());
  }
  return snap;
}

void restore(Model& model, const Snapshot& snap) {
  auto params = model.parameters();
  if (params.size() != snap.size()) throw DimensionError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    if (dst.size() != snap[i].size()) throw DimensionError("restore: shape mismatch");
    std::copy(snap[i].begin(), snap[i].end(), dst.begin());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const json& meta) {
  json arrays = json::array();
  for (const auto& p : model.parameters()) {
    auto v = p.tensor.data();
    arrays.push_back({{"name", p.name},
                      {"shape", p.tensor.shape()},
                      {"data", std::vector<Real>(v.begin(), v.end())}});
  }
  json doc{{"format", "seqrec-checkpoint"},
           {"version", kCheckpointVersion},
           {"config", config_to_json(model.config())},
           {"arrays", std::move(arrays)},
           {"meta", meta}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
}

Model load_checkpoint(const std::filesystem::path& path, json* meta) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || doc.value("format", "") != "seqrec-checkpoint") {
    throw DataError(path.string() + " is not a seqrec checkpoint");
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version in " + path.string());
  }
  Model model(config_from_json(doc.at("config")), 0);
  auto params = model.parameters();
  const auto& arrays = doc.at("arrays");
  if (arrays.size() != params.size()) throw DataError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& a = arrays[i];
    if (a.at("name").get<std::string>() != params[i].name ||
        a.at("shape").get<num::Shape>() != params[i].tensor.shape()) {
      throw DataError("checkpoint array " + std::to_string(i) + " does not match the model layout");
    }
    auto values = a.at("data").get<std::vector<Real>>();
    std::copy(values.begin(), values.end(), params[i].tensor.mutable_data().begin());
  }
  if (meta) *meta = doc.value("meta", json::object());
  return model;
}

}  // namespace seqrec::backbone
