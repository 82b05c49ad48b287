#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace etriage {

/// Probability threshold and log-safety clamp shared by scoring and labelling.
struct DecisionConfig {
  double tau = 0.5;
  double clamp_epsilon = 1e-12;

  /// Throws UsageError unless 0 < tau < 1 and 0 < clamp_epsilon < 0.5.
  void validate() const;
};

/// One example: ground truth, optional severity grade and the K member
/// probabilities of the ensemble.
struct PredictionRecord {
  std::string example_id;
  int label = 0;
  std::optional<int> severity;
  std::vector<double> members;

  std::size_t ensemble_size() const { return members.size(); }

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

struct LoadOptions {
  // SL0/SL1 => label 0, SL2..SL4 => label 1.
  bool check_severity_consistency = true;
};

/// Validated, immutable collection of records sharing one ensemble size.
class EnsembleDataset {
 public:
  /// Validates every record; throws DataError on the first violation.
  explicit EnsembleDataset(std::vector<PredictionRecord> records,
                           LoadOptions options = {});

  const std::vector<PredictionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t ensemble_size() const { return ensemble_size_; }
  const PredictionRecord& operator[](std::size_t i) const { return records_[i]; }
  bool all_have_severity() const;

  friend bool operator==(const EnsembleDataset&, const EnsembleDataset&) = default;

 private:
  std::vector<PredictionRecord> records_;
  std::size_t ensemble_size_ = 0;
};

// Member aggregation and the thresholded decision.
double ensemble_output(std::span<const double> members);
double ensemble_output(const PredictionRecord& record);
int predicted_label(double ensemble_prob, const DecisionConfig& cfg);
int predicted_label(const PredictionRecord& record, const DecisionConfig& cfg);

// CSV ingestion/emission. Header: example_id,label,severity,y_1,...,y_K.
EnsembleDataset parse_dataset(std::istream& in, LoadOptions options = {},
                              const std::string& source_name = "<stream>");
EnsembleDataset load_dataset(const std::filesystem::path& path,
                             LoadOptions options = {});
void write_dataset(std::ostream& out, const EnsembleDataset& dataset);
void save_dataset(const std::filesystem::path& path, const EnsembleDataset& dataset);

// 17 significant digits, enough for every double to reparse bit-exactly.
std::string format_double(double value);

}  // namespace etriage
