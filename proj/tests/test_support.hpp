#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "etriage/data_model.hpp"

namespace etriage::testing {

inline PredictionRecord record(std::string id, int label, std::vector<double> members,
                               std::optional<int> severity = std::nullopt) {
  PredictionRecord r;
  r.example_id = std::move(id);
  r.label = label;
  r.severity = severity;
  r.members = std::move(members);
  return r;
}

/// Random dataset. With `grid` the predictions are multiples of 1/8, which
/// produces plenty of exact score ties.
inline EnsembleDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t k,
                                      bool grid = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> g(0, 8);
  std::bernoulli_distribution coin(0.5);
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> members(k);
    for (auto& y : members) y = grid ? g(rng) / 8.0 : u(rng);
    // ids sort differently from row order so the id tie-break matters
    records.push_back(record("e" + std::to_string((i * 7919) % 1000003), coin(rng) ? 1 : 0,
                             std::move(members)));
  }
  return EnsembleDataset(std::move(records));
}

inline std::filesystem::path fresh_temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("etriage_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace etriage::testing
