#include "seqrec/data/interactions.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <string_view>
#include <tuple>
#include <unordered_map>

#include "seqrec/errors.hpp"

namespace seqrec::data {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_timestamp(std::string_view text, std::int64_t& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end && out >= 0;
}

}  // namespace

InteractionLog parse_interactions(std::istream& in, const LoadOptions& options) {
  const char delimiter = options.delimiter == 0 ? ',' : options.delimiter;
  const std::size_t needed = *std::max_element(options.columns.begin(), options.columns.end()) + 1;
  InteractionLog log;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
  std::string line;
  std::size_t data_lines = 0;
  bool first = true;
  while (std::getline(in, line)) {
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    auto fields = split_fields(view, delimiter);
    const bool header_candidate = first && options.detect_header;
    first = false;
    std::int64_t ts = 0;
    if (fields.size() < needed) {
      ++data_lines;
      ++log.malformed_lines;
      continue;
    }
    const auto user = trim(fields[options.columns[0]]);
    const auto item = trim(fields[options.columns[1]]);
    if (!parse_timestamp(trim(fields[options.columns[2]]), ts)) {
      if (header_candidate) continue;
      ++data_lines;
      ++log.malformed_lines;
      continue;
    }
    ++data_lines;
    if (user.empty() || item.empty()) {
      ++log.malformed_lines;
      continue;
    }
    Interaction rec{std::string(user), std::string(item), ts};
    if (options.dedup && !seen.emplace(rec.user, rec.item, rec.timestamp).second) continue;
    log.records.push_back(std::move(rec));
  }
  if (data_lines > 0 &&
      static_cast<double>(log.malformed_lines) >
          options.max_malformed_fraction * static_cast<double>(data_lines)) {
    throw IngestionError(std::to_string(log.malformed_lines) + " of " +
                         std::to_string(data_lines) +
                         " lines are malformed (expected user, item, integer timestamp)");
  }
  return log;
}

InteractionLog load_interactions(const std::filesystem::path& path, LoadOptions options) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read interaction file " + path.string());
  if (options.delimiter == 0) options.delimiter = path.extension() == ".tsv" ? '\t' : ',';
  return parse_interactions(in, options);
}

void write_interactions(const std::filesystem::path& path, const InteractionLog& log,
                        char delimiter) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "user" << delimiter << "item" << delimiter << "timestamp\n";
  for (const auto& r : log.records) {
    out << r.user << delimiter << r.item << delimiter << r.timestamp << '\n';
  }
}

InteractionLog p_core_filter(const InteractionLog& log, const FilterOptions& options) {
  InteractionLog current = log;
  while (true) {
    const std::size_t before = current.records.size();
    std::unordered_map<std::string, std::size_t> item_counts;
    for (const auto& r : current.records) ++item_counts[r.item];
    std::erase_if(current.records, [&](const Interaction& r) {
      return item_counts[r.item] < options.min_item_interactions;
    });
    std::unordered_map<std::string, std::size_t> user_counts;
    for (const auto& r : current.records) ++user_counts[r.user];
    std::erase_if(current.records, [&](const Interaction& r) {
      return user_counts[r.user] < options.min_user_interactions;
    });
    if (!options.until_fixpoint || current.records.size() == before) break;
  }
  return current;
}

}  // namespace seqrec::data
