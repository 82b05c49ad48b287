#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace etriage::io {

/// Writes `contents` to a sibling temp file and renames it over `path`, so a
/// reader never observes a partially written file. Throws DataError.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// A batch of files that are only written once every one has been rendered.
class OutputSet {
 public:
  void add(std::filesystem::path path, std::string contents);
  /// Creates the parent directories and writes each file atomically.
  void commit() const;
  const std::vector<std::pair<std::filesystem::path, std::string>>& files() const {
    return files_;
  }

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

std::vector<std::string> split(std::string_view line, char sep);

}  // namespace etriage::io
