#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etriage/data_model.hpp"
#include "etriage/uncertainty_metrics.hpp"

namespace etriage {

/// Ranking used to pick uncertain negatives. UnionMeanVar flags the union of
/// the MEAN and VAR selections, so it may exceed the q% budget.
enum class TriageMetric { Mean, Entropy, Var, Kl, UnionMeanVar };

std::string_view to_string(TriageMetric metric);
/// mean, entropy, var, kl, union (alias mean+var). Throws UsageError.
TriageMetric parse_triage_metric(std::string_view name);

struct TriageConfig {
  double q = 5.0;  // percent of predicted negatives sent back for review
  TriageMetric metric = TriageMetric::Mean;
  ScoringOptions scoring;

  void validate() const;
};

struct TriageOutcome {
  std::size_t n_negatives = 0;
  std::size_t n_uncertain = 0;
  std::size_t n_false_neg_found = 0;
  std::optional<double> fnp;  // undefined when nothing was selected
  std::size_t n_false_neg_total = 0;
  std::size_t n_false_neg_remaining = 0;
  double reduction_pct = 0.0;
};

enum class Population { All, Negatives };
std::string_view to_string(Population population);
Population parse_population(std::string_view name);

struct SeverityBreakdown {
  double theta = 0.0;
  std::size_t n_selected = 0;
  std::array<double, 5> proportions{};  // SL0..SL4
};

/// ceil(percent/100 * n), the number of items a percentage budget selects.
std::size_t selected_count(double percent, std::size_t n);

/// Indices of `candidates` ordered by descending score, ties by ascending id.
std::vector<std::size_t> rank_by_score(const UncertaintyReport& report,
                                       std::vector<std::size_t> candidates);

/// Highest-scored predicted negatives, in rank order. Throws DataError when
/// the dataset has no predicted negatives.
std::vector<std::string> select_uncertain_negatives(const EnsembleDataset& dataset,
                                                    const UncertaintyReport& report, double q,
                                                    const DecisionConfig& decision);

/// MEAN selection followed by the VAR picks it does not already contain.
std::vector<std::string> select_union_mean_var(const EnsembleDataset& dataset,
                                               const TriageConfig& cfg, int threads = 0);

/// Perfect human review of the flagged negatives: every false negative among
/// them is corrected, the rest of the false negatives remain.
TriageOutcome evaluate_triage(const EnsembleDataset& dataset, const TriageConfig& cfg,
                              int threads = 0);

/// Accounting for an explicit set of flagged ids.
TriageOutcome triage_outcome_for(const EnsembleDataset& dataset,
                                 const std::vector<std::string>& flagged,
                                 const DecisionConfig& decision);

struct TriageRow {
  std::string ensemble_tag;
  double q = 0.0;
  TriageMetric metric = TriageMetric::Mean;
  TriageOutcome outcome;
};

/// Every (metric, q) cell; cells are evaluated in parallel, row order is
/// metric-major in the order given.
std::vector<TriageRow> evaluate_triage_grid(const EnsembleDataset& dataset,
                                            const std::vector<TriageMetric>& metrics,
                                            const std::vector<double>& qs,
                                            const ScoringOptions& scoring,
                                            const std::string& ensemble_tag, int threads = 0);

SeverityBreakdown severity_breakdown(const EnsembleDataset& dataset,
                                     const UncertaintyReport& report, double theta,
                                     Population population = Population::All,
                                     const DecisionConfig& decision = {});

/// Equal-width bins over [lo, hi]; out-of-range scores land in the end bins.
std::vector<std::size_t> score_histogram(const std::vector<double>& scores, std::size_t bins,
                                         double lo, double hi);
std::vector<std::size_t> score_histogram(const UncertaintyReport& report, std::size_t bins,
                                         double lo, double hi);

std::string triage_table_csv(const std::vector<TriageRow>& rows);
std::string histogram_csv(const std::vector<std::size_t>& counts, double lo, double hi);
std::string severity_table_csv(const std::vector<std::pair<MetricKind, SeverityBreakdown>>& rows);

}  // namespace etriage
