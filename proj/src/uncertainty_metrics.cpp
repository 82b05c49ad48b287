#include "etriage/uncertainty_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "etriage/error.hpp"
#include "etriage/parallel.hpp"

namespace etriage {

std::string_view to_string(MetricKind metric) {
  switch (metric) {
    case MetricKind::Mean: return "mean";
    case MetricKind::Entropy: return "entropy";
    case MetricKind::Var: return "var";
    case MetricKind::Kl: return "kl";
  }
  return "unknown";
}

std::string_view to_string(KlMode mode) { return mode == KlMode::Full ? "full" : "literal"; }

MetricKind parse_metric(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mean") return MetricKind::Mean;
  if (lower == "entropy") return MetricKind::Entropy;
  if (lower == "var") return MetricKind::Var;
  if (lower == "kl") return MetricKind::Kl;
  throw UsageError("unknown metric '" + std::string(name) + "' (expected mean, entropy, var, kl)");
}

double margin_score(double ensemble_prob, double tau) { return 1.0 - std::abs(ensemble_prob - tau); }

double entropy_score(double ensemble_prob, double clamp_epsilon) {
  const double p = std::clamp(ensemble_prob, clamp_epsilon, 1.0 - clamp_epsilon);
  const double q = 1.0 - p;
  return std::max(0.0, -(p * std::log(p) + q * std::log(q)));
}

double sample_variance(std::span<const double> members) {
  if (members.size() < 2)
    throw MetricUndefined("sample variance needs at least 2 ensemble members, got " +
                          std::to_string(members.size()));
  const double mean = ensemble_output(members);
  double ss = 0.0;
  for (double y : members) {
    const double d = y - mean;
    ss += d * d;
  }
  return ss / static_cast<double>(members.size() - 1);
}

double kl_score(std::span<const double> members, double clamp_epsilon, KlMode mode) {
  const double lo = clamp_epsilon;
  const double hi = 1.0 - clamp_epsilon;
  const double q = std::clamp(ensemble_output(members), lo, hi);
  const double log_q = std::log(q);
  const double log_1q = std::log1p(-q);
  double total = 0.0;
  for (double y : members) {
    const double p = std::clamp(y, lo, hi);
    if (p == q) continue;
    total += p * (std::log(p) - log_q);
    if (mode == KlMode::Full) total += (1.0 - p) * (std::log1p(-p) - log_1q);
  }
  return std::max(0.0, total / static_cast<double>(members.size()));
}

double score_mean(const PredictionRecord& record, const DecisionConfig& cfg) {
  return margin_score(ensemble_output(record), cfg.tau);
}

double score_entropy(const PredictionRecord& record, const DecisionConfig& cfg) {
  return entropy_score(ensemble_output(record), cfg.clamp_epsilon);
}

double score_var(const PredictionRecord& record) { return sample_variance(record.members); }

double score_kl(const PredictionRecord& record, const DecisionConfig& cfg, KlMode mode) {
  return kl_score(record.members, cfg.clamp_epsilon, mode);
}

double score_record(const PredictionRecord& record, MetricKind metric,
                    const ScoringOptions& options) {
  switch (metric) {
    case MetricKind::Mean: return score_mean(record, options.decision);
    case MetricKind::Entropy: return score_entropy(record, options.decision);
    case MetricKind::Var: return score_var(record);
    case MetricKind::Kl: return score_kl(record, options.decision, options.kl_mode);
  }
  return 0.0;
}

namespace {

UncertaintyReport make_report_shell(const EnsembleDataset& dataset, MetricKind metric,
                                    const ScoringOptions& options) {
  options.decision.validate();
  if (metric == MetricKind::Var && dataset.ensemble_size() < 2)
    throw MetricUndefined("example '" + dataset[0].example_id +
                          "': VAR needs an ensemble of at least 2 members, dataset has K=" +
                          std::to_string(dataset.ensemble_size()));
  UncertaintyReport report;
  report.metric = metric;
  report.options = options;
  report.example_ids.reserve(dataset.size());
  for (const auto& r : dataset.records()) report.example_ids.push_back(r.example_id);
  report.scores.assign(dataset.size(), 0.0);
  return report;
}

}  // namespace

UncertaintyReport score_dataset(const EnsembleDataset& dataset, MetricKind metric,
                                const ScoringOptions& options, int threads) {
  UncertaintyReport report = make_report_shell(dataset, metric, options);
  const auto n = static_cast<std::ptrdiff_t>(dataset.size());
  const auto& records = dataset.records();
  double* out = report.scores.data();
  [[maybe_unused]] const int workers = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(workers)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_record(records[i], metric, options);
  return report;
}

UncertaintyReport score_dataset_serial(const EnsembleDataset& dataset, MetricKind metric,
                                       const ScoringOptions& options) {
  UncertaintyReport report = make_report_shell(dataset, metric, options);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    report.scores[i] = score_record(dataset[i], metric, options);
  return report;
}

std::string report_to_csv(const UncertaintyReport& report) {
  std::ostringstream out;
  out << "example_id,score\n";
  for (std::size_t i = 0; i < report.size(); ++i)
    out << report.example_ids[i] << ',' << format_double(report.scores[i]) << '\n';
  return out.str();
}

namespace {

nlohmann::ordered_json report_meta(const UncertaintyReport& report) {
  nlohmann::ordered_json meta;
  meta["metric"] = to_string(report.metric);
  meta["tau"] = report.options.decision.tau;
  meta["clamp_epsilon"] = report.options.decision.clamp_epsilon;
  meta["kl_mode"] = to_string(report.options.kl_mode);
  meta["n_examples"] = report.size();
  return meta;
}

}  // namespace

std::string report_to_json(const UncertaintyReport& report) {
  auto doc = report_meta(report);
  auto scores = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.size(); ++i)
    scores.push_back({{"example_id", report.example_ids[i]}, {"score", report.scores[i]}});
  doc["scores"] = std::move(scores);
  return doc.dump(2) + "\n";
}

std::string report_sidecar_json(const UncertaintyReport& report) {
  return report_meta(report).dump(2) + "\n";
}

}  // namespace etriage
