#include "seqrec/harness/sweep.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "seqrec/errors.hpp"
#include "seqrec/harness/logging.hpp"
#include "seqrec/harness/trainer.hpp"

namespace seqrec::harness {
namespace {

using nlohmann::json;

void set_dotted(json& target, const std::string& key, const json& value) {
  json* node = &target;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void merge_into(json& target, const json& patch) {
  for (const auto& [k, v] : patch.items()) {
    if (v.is_object() && target.contains(k) && target[k].is_object()) {
      merge_into(target[k], v);
    } else {
      set_dotted(target, k, v);
    }
  }
}

std::string params_string(const TrainConfig& c, const sce::SceConfig& resolved) {
  switch (c.loss) {
    case LossKind::kCe: return "full";
    case LossKind::kBce: return "k=1";
    case LossKind::kBcePlus:
    case LossKind::kCeMinus: return "k=" + std::to_string(c.negatives);
    case LossKind::kSce:
      return "nb=" + std::to_string(resolved.n_buckets) + ";bx=" + std::to_string(resolved.bucket_x) +
             ";by=" + std::to_string(resolved.bucket_y) + ";mix=" + (resolved.use_mix ? "1" : "0");
  }
  return "";
}

json row_json(const SweepRow& r) {
  json j{{"config_id", r.config_id}, {"config", to_json(r.config)}, {"ok", r.ok}};
  if (r.ok) {
    j["peak_bytes"] = r.outcome.peak_bytes;
    j["seconds"] = r.outcome.seconds;
    j["metrics"] = eval::report_to_json(r.outcome.metrics);
    j["parameter_count"] = r.outcome.parameter_count;
    j["params"] = r.outcome.params;
  } else {
    j["error"] = r.error;
  }
  return j;
}

SweepRow row_from_json(const json& j) {
  SweepRow r;
  r.config_id = j.at("config_id").get<std::string>();
  r.config = config_from_json(j.at("config"));
  r.ok = j.at("ok").get<bool>();
  if (r.ok) {
    r.outcome.peak_bytes = j.at("peak_bytes").get<std::int64_t>();
    r.outcome.seconds = j.at("seconds").get<double>();
    r.outcome.metrics = eval::report_from_json(j.at("metrics"));
    r.outcome.parameter_count = j.value("parameter_count", std::size_t{0});
    r.outcome.params = j.value("params", "");
  } else {
    r.error = j.value("error", "");
  }
  return r;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string front_csv(const std::vector<ParetoPoint>& front) {
  std::ostringstream os;
  os << "config_id,peak_bytes,seconds,ndcg@10\n";
  for (const auto& p : front) {
    os << p.config_id << ',' << p.peak_bytes << ',' << csv_number(p.seconds) << ','
       << csv_number(p.ndcg10) << '\n';
  }
  return os.str();
}

}  // namespace

SweepGrid parse_grid(const json& grid) {
  if (!grid.is_object()) throw ParameterError("sweep grid must be a JSON object");
  if (grid.value("version", 1) != 1) throw ParameterError("unsupported sweep grid version");
  SweepGrid out;
  out.name = grid.value("name", "sweep");
  const json base = grid.value("base", json::object());
  std::vector<json> combos{base};
  if (grid.contains("axes")) {
    for (const auto& [key, values] : grid.at("axes").items()) {
      if (!values.is_array() || values.empty()) {
        throw ParameterError("sweep axis '" + key + "' must be a non-empty array");
      }
      std::vector<json> next;
      for (const auto& c : combos) {
        for (const auto& v : values) {
          json copy = c;
          set_dotted(copy, key, v);
          next.push_back(std::move(copy));
        }
      }
      combos = std::move(next);
    }
  }
  if (grid.contains("extra")) {
    for (const auto& patch : grid.at("extra")) {
      json copy = base;
      merge_into(copy, patch);
      combos.push_back(std::move(copy));
    }
  }
  std::set<std::string> seen;
  for (const auto& c : combos) {
    TrainConfig cfg = config_from_json(c);
    cfg.validate();
    if (seen.insert(config_id(cfg)).second) out.configs.push_back(cfg);
  }
  if (out.configs.empty()) throw ParameterError("sweep grid expands to no configs");
  return out;
}

SweepGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read sweep grid " + path.string());
  return parse_grid(json::parse(in));
}

Runner training_runner(const data::SequenceDataset& dataset) {
  return [&dataset](const TrainConfig& config) {
    auto result = train(config, dataset);
    RunOutcome out;
    out.peak_bytes = result.peak_step_bytes;
    out.seconds = result.train_seconds;
    out.metrics = result.test;
    out.parameter_count = result.model->parameter_count();
    out.params = params_string(config, result.resolved_sce);
    return out;
  };
}

SweepResult run_sweep(const SweepGrid& grid, const SweepOptions& options) {
  if (!options.runner) throw UsageError("run_sweep: no runner");
  SweepResult result;
  for (const auto& config : grid.configs) {
    const std::string id = config_id(config);
    const auto cache_file = options.cache_dir.empty()
                                ? std::filesystem::path{}
                                : options.cache_dir / (id + ".json");
    if (!cache_file.empty() && std::filesystem::exists(cache_file)) {
      std::ifstream in(cache_file);
      SweepRow row = row_from_json(json::parse(in));
      if (row.ok) {
        result.rows.push_back(row);
        if (options.on_row) options.on_row(row, true);
        continue;
      }
    }
    SweepRow row;
    row.config_id = id;
    row.config = config;
    try {
      row.outcome = options.runner(config);
      if (row.outcome.params.empty()) row.outcome.params = params_string(config, config.sce);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (!cache_file.empty()) write_atomically(cache_file, row_json(row).dump(2) + "\n");
    result.rows.push_back(row);
    if (options.on_row) options.on_row(row, false);
  }
  result.front = pareto_front(points_of(result.rows));
  return result;
}

std::vector<ParetoPoint> points_of(const std::vector<SweepRow>& rows) {
  std::vector<ParetoPoint> points;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    points.push_back({r.config_id, r.outcome.peak_bytes, r.outcome.seconds,
                      r.outcome.metrics.ndcg_at(10), r.outcome.metrics});
  }
  return points;
}

std::string results_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "config_id,loss,s,l,params,peak_bytes,seconds,ndcg@1,ndcg@5,ndcg@10,hr@5,hr@10,cov@1,cov@5,"
        "cov@10\n";
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const auto& m = r.outcome.metrics;
    os << r.config_id << ',' << loss_name(r.config.loss) << ',' << r.config.batch_size << ','
       << r.config.seq_len << ',' << r.outcome.params << ',' << r.outcome.peak_bytes << ','
       << csv_number(r.outcome.seconds) << ',' << csv_number(m.ndcg_at(1)) << ','
       << csv_number(m.ndcg_at(5)) << ',' << csv_number(m.ndcg_at(10)) << ','
       << csv_number(m.hr_at(5)) << ',' << csv_number(m.hr_at(10)) << ','
       << csv_number(m.cov_at(1)) << ',' << csv_number(m.cov_at(5)) << ','
       << csv_number(m.cov_at(10)) << '\n';
  }
  return os.str();
}

json results_json(const SweepResult& result) {
  json rows = json::array();
  for (const auto& r : result.rows) rows.push_back(row_json(r));
  json front = json::array();
  for (const auto& p : result.front) {
    front.push_back({{"config_id", p.config_id},
                     {"peak_bytes", p.peak_bytes},
                     {"seconds", p.seconds},
                     {"ndcg@10", p.ndcg10},
                     {"metrics", eval::report_to_json(p.metrics)}});
  }
  return {{"rows", std::move(rows)}, {"front", std::move(front)}};
}

void write_sweep_outputs(const std::filesystem::path& dir, const SweepResult& result) {
  std::filesystem::create_directories(dir);
  write_atomically(dir / "results.csv", results_csv(result.rows));
  const json all = results_json(result);
  write_atomically(dir / "results.json", all.dump(2) + "\n");
  write_atomically(dir / "front.csv", front_csv(result.front));
  write_atomically(dir / "front.json", all.at("front").dump(2) + "\n");
}

}  // namespace seqrec::harness
