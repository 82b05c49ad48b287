#include "etriage/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "etriage/error.hpp"
#include "etriage/io.hpp"

namespace etriage {

void DecisionConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0))
    throw UsageError("threshold tau must lie in (0,1), got " + format_double(tau));
  if (!(clamp_epsilon > 0.0 && clamp_epsilon < 0.5))
    throw UsageError("clamp epsilon must lie in (0,0.5), got " + format_double(clamp_epsilon));
}

namespace {

void validate_record(const PredictionRecord& r, std::size_t k, const LoadOptions& options) {
  const std::string where = "example '" + r.example_id + "'";
  if (r.example_id.empty()) throw DataError("empty example_id");
  if (r.example_id.find_first_of(",\"\r\n") != std::string::npos)
    throw DataError(where + ": example_id must not contain commas, quotes or newlines");
  if (r.label != 0 && r.label != 1)
    throw DataError(where + ": label must be 0 or 1, got " + std::to_string(r.label));
  if (r.members.empty()) throw DataError(where + ": no member predictions");
  if (r.members.size() != k)
    throw DataError(where + ": inconsistent ensemble size " + std::to_string(r.members.size()) +
                    ", expected " + std::to_string(k));
  for (std::size_t m = 0; m < r.members.size(); ++m) {
    const double y = r.members[m];
    if (!(y >= 0.0 && y <= 1.0))
      throw DataError(where + ": probability y_" + std::to_string(m + 1) + " = " +
                      format_double(y) + " outside [0,1]");
  }
  if (r.severity) {
    const int sl = *r.severity;
    if (sl < 0 || sl > 4)
      throw DataError(where + ": severity must be in 0..4, got " + std::to_string(sl));
    if (options.check_severity_consistency && r.label != (sl >= 2 ? 1 : 0))
      throw DataError(where + ": label " + std::to_string(r.label) +
                      " inconsistent with severity " + std::to_string(sl));
  }
}

}  // namespace

EnsembleDataset::EnsembleDataset(std::vector<PredictionRecord> records, LoadOptions options)
    : records_(std::move(records)) {
  if (records_.empty()) throw DataError("dataset has no records");
  ensemble_size_ = records_.front().members.size();
  std::unordered_set<std::string> seen;
  seen.reserve(records_.size());
  for (const auto& r : records_) {
    validate_record(r, ensemble_size_, options);
    if (!seen.insert(r.example_id).second)
      throw DataError("duplicate example_id '" + r.example_id + "'");
  }
}

bool EnsembleDataset::all_have_severity() const {
  return std::all_of(records_.begin(), records_.end(),
                     [](const PredictionRecord& r) { return r.severity.has_value(); });
}

double ensemble_output(std::span<const double> members) {
  const double first = members.front();
  if (std::all_of(members.begin(), members.end(), [first](double y) { return y == first; }))
    return first;
  const auto k = static_cast<double>(members.size());
  double sum = 0.0;
  for (double y : members) sum += y;
  double mean = sum / k;
  // One refinement pass removes most of the summation rounding error.
  double residual = 0.0;
  for (double y : members) residual += y - mean;
  mean += residual / k;
  return std::clamp(mean, 0.0, 1.0);
}

double ensemble_output(const PredictionRecord& record) { return ensemble_output(record.members); }

int predicted_label(double ensemble_prob, const DecisionConfig& cfg) {
  return ensemble_prob >= cfg.tau ? 1 : 0;
}

int predicted_label(const PredictionRecord& record, const DecisionConfig& cfg) {
  return predicted_label(ensemble_output(record), cfg);
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& field,
                             const std::string& msg) {
  throw DataError(source + ":" + std::to_string(line) + ": field '" + field + "': " + msg);
}

template <typename T>
T parse_number(const std::string& text, const std::string& source, std::size_t line,
               const std::string& field) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last)
    parse_fail(source, line, field, "cannot parse '" + text + "' as a number");
  return value;
}

}  // namespace

EnsembleDataset parse_dataset(std::istream& in, LoadOptions options,
                              const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source_name + ": empty file, header required");
  const auto header = io::split(trim_cr(line), ',');
  if (header.size() < 4 || header[0] != "example_id" || header[1] != "label" ||
      header[2] != "severity")
    throw DataError(source_name +
                    ":1: header must be example_id,label,severity,y_1,...,y_K");
  for (std::size_t k = 3; k < header.size(); ++k) {
    if (header[k] != "y_" + std::to_string(k - 2))
      throw DataError(source_name + ":1: expected column 'y_" + std::to_string(k - 2) +
                      "', got '" + header[k] + "'");
  }
  const std::size_t k_header = header.size() - 3;

  std::vector<PredictionRecord> records;
  std::size_t line_no = 1;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto fields = io::split(line, ',');
    if (fields.size() != header.size())
      throw DataError(source_name + ":" + std::to_string(line_no) +
                      ": inconsistent ensemble size: row has " +
                      std::to_string(fields.size() >= 3 ? fields.size() - 3 : 0) +
                      " predictions, header declares " + std::to_string(k_header));
    PredictionRecord r;
    r.example_id = fields[0];
    if (r.example_id.empty()) parse_fail(source_name, line_no, "example_id", "empty id");
    r.label = parse_number<int>(fields[1], source_name, line_no, "label");
    if (r.label != 0 && r.label != 1) parse_fail(source_name, line_no, "label", "must be 0 or 1");
    if (!fields[2].empty()) {
      const int sl = parse_number<int>(fields[2], source_name, line_no, "severity");
      if (sl < 0 || sl > 4) parse_fail(source_name, line_no, "severity", "must be in 0..4");
      r.severity = sl;
    }
    r.members.reserve(k_header);
    for (std::size_t k = 3; k < fields.size(); ++k) {
      const double y = parse_number<double>(fields[k], source_name, line_no, header[k]);
      if (!(y >= 0.0 && y <= 1.0))
        parse_fail(source_name, line_no, header[k],
                   "probability " + fields[k] + " outside [0,1]");
      r.members.push_back(y);
    }
    if (options.check_severity_consistency && r.severity &&
        r.label != (*r.severity >= 2 ? 1 : 0))
      parse_fail(source_name, line_no, "label",
                 "label " + fields[1] + " inconsistent with severity " + fields[2]);
    if (!seen.insert(r.example_id).second)
      parse_fail(source_name, line_no, "example_id", "duplicate id '" + r.example_id + "'");
    records.push_back(std::move(r));
  }
  if (in.bad()) throw DataError(source_name + ": read error");
  return EnsembleDataset(std::move(records), options);
}

EnsembleDataset load_dataset(const std::filesystem::path& path, LoadOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_dataset(in, options, path.string());
}

void write_dataset(std::ostream& out, const EnsembleDataset& dataset) {
  out << "example_id,label,severity";
  for (std::size_t k = 1; k <= dataset.ensemble_size(); ++k) out << ",y_" << k;
  out << '\n';
  for (const auto& r : dataset.records()) {
    out << r.example_id << ',' << r.label << ',';
    if (r.severity) out << *r.severity;
    for (double y : r.members) out << ',' << format_double(y);
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const EnsembleDataset& dataset) {
  std::ostringstream out;
  write_dataset(out, dataset);
  io::write_file_atomic(path, out.str());
}

}  // namespace etriage
