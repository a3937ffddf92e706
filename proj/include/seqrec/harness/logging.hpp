#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace seqrec::harness {

// Line-delimited JSON sink. A default-constructed writer drops records.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  // Truncates unless append is set; creates parent directories.
  explicit JsonlWriter(const std::filesystem::path& path, bool append = false);

  bool is_open() const noexcept { return out_.is_open(); }
  void write(const nlohmann::json& record);

 private:
  std::ofstream out_;
};

// Writes text to path via a temporary sibling and an atomic rename.
void write_atomically(const std::filesystem::path& path, const std::string& text);

}  // namespace seqrec::harness
