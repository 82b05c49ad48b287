#include "etriage/io.hpp"

#include <fstream>
#include <system_error>
#include <unistd.h>

#include "etriage/error.hpp"

namespace etriage::io {

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw DataError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                    ec.message());
  }
}

void OutputSet::add(std::filesystem::path path, std::string contents) {
  files_.emplace_back(std::move(path), std::move(contents));
}

void OutputSet::commit() const {
  for (const auto& [path, contents] : files_) {
    if (path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
      if (ec) throw DataError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
  }
  for (const auto& [path, contents] : files_) write_file_atomic(path, contents);
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace etriage::io
