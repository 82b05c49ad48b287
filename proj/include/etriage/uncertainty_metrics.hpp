#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "etriage/data_model.hpp"

namespace etriage {

enum class MetricKind { Mean, Entropy, Var, Kl };

// Full: p log(p/q) + (1-p) log((1-p)/(1-q)).
// Literal: only the p log(p/q) term, kept for comparison runs.
enum class KlMode { Full, Literal };

struct ScoringOptions {
  DecisionConfig decision;
  KlMode kl_mode = KlMode::Full;
};

std::string_view to_string(MetricKind metric);
std::string_view to_string(KlMode mode);
/// Accepts mean, entropy, var, kl (case-insensitive). Throws UsageError.
MetricKind parse_metric(std::string_view name);

// Kernels over raw values. Larger score == more uncertain.
double margin_score(double ensemble_prob, double tau);
double entropy_score(double ensemble_prob, double clamp_epsilon);
/// Unbiased sample variance; throws MetricUndefined for fewer than 2 values.
double sample_variance(std::span<const double> members);
double kl_score(std::span<const double> members, double clamp_epsilon, KlMode mode = KlMode::Full);

double score_mean(const PredictionRecord& record, const DecisionConfig& cfg);
double score_entropy(const PredictionRecord& record, const DecisionConfig& cfg);
double score_var(const PredictionRecord& record);
double score_kl(const PredictionRecord& record, const DecisionConfig& cfg,
                KlMode mode = KlMode::Full);
double score_record(const PredictionRecord& record, MetricKind metric,
                    const ScoringOptions& options);

/// Scores for one metric, aligned with the dataset's record order.
struct UncertaintyReport {
  MetricKind metric = MetricKind::Mean;
  ScoringOptions options;
  std::vector<std::string> example_ids;
  std::vector<double> scores;

  std::size_t size() const { return scores.size(); }
};

/// Scores every record, splitting records across `threads` OpenMP workers
/// (0 = default). Output does not depend on the worker count.
UncertaintyReport score_dataset(const EnsembleDataset& dataset, MetricKind metric,
                                const ScoringOptions& options, int threads = 0);

/// Plain loop over the records; the reference the parallel path is tested against.
UncertaintyReport score_dataset_serial(const EnsembleDataset& dataset, MetricKind metric,
                                       const ScoringOptions& options);

// Emission: `example_id,score` CSV, full JSON report, and a metadata sidecar.
std::string report_to_csv(const UncertaintyReport& report);
std::string report_to_json(const UncertaintyReport& report);
std::string report_sidecar_json(const UncertaintyReport& report);

}  // namespace etriage
