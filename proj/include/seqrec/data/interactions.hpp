#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace seqrec::data {

struct Interaction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
};

struct InteractionLog {
  std::vector<Interaction> records;
  std::size_t malformed_lines = 0;
};

struct LoadOptions {
  // 0 picks ',' or '\t' from the file extension (".tsv" means tab).
  char delimiter = 0;
  // Column positions of user, item and timestamp.
  std::array<std::size_t, 3> columns{0, 1, 2};
  // A first line whose timestamp field does not parse is treated as a header.
  bool detect_header = true;
  // Ingestion fails when malformed lines exceed this fraction of data lines.
  double max_malformed_fraction = 0.01;
  // Drop exact repeats of (user, item, timestamp).
  bool dedup = false;
};

// Throws IngestionError if the file cannot be read or has too many
// malformed lines. An empty file yields an empty log.
InteractionLog load_interactions(const std::filesystem::path& path, LoadOptions options = {});
InteractionLog parse_interactions(std::istream& in, const LoadOptions& options);

void write_interactions(const std::filesystem::path& path, const InteractionLog& log,
                        char delimiter = ',');

struct FilterOptions {
  std::size_t min_item_interactions = 5;
  std::size_t min_user_interactions = 20;
  // Repeat the two passes until nothing changes.
  bool until_fixpoint = false;
};

// Drops items with fewer than min_item interactions, then users with fewer
// than min_user remaining records. Record order is preserved.
InteractionLog p_core_filter(const InteractionLog& log, const FilterOptions& options = {});

}  // namespace seqrec::data
