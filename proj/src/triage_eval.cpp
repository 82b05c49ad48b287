#include "etriage/triage_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "etriage/error.hpp"
#include "etriage/parallel.hpp"

namespace etriage {

std::string_view to_string(TriageMetric metric) {
  switch (metric) {
    case TriageMetric::Mean: return "mean";
    case TriageMetric::Entropy: return "entropy";
    case TriageMetric::Var: return "var";
    case TriageMetric::Kl: return "kl";
    case TriageMetric::UnionMeanVar: return "mean+var";
  }
  return "unknown";
}

TriageMetric parse_triage_metric(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "union" || lower == "mean+var") return TriageMetric::UnionMeanVar;
  switch (parse_metric(lower)) {
    case MetricKind::Mean: return TriageMetric::Mean;
    case MetricKind::Entropy: return TriageMetric::Entropy;
    case MetricKind::Var: return TriageMetric::Var;
    case MetricKind::Kl: return TriageMetric::Kl;
  }
  return TriageMetric::Mean;
}

std::string_view to_string(Population population) {
  return population == Population::All ? "all" : "negatives";
}

Population parse_population(std::string_view name) {
  if (name == "all") return Population::All;
  if (name == "negatives") return Population::Negatives;
  throw UsageError("unknown population '" + std::string(name) + "' (expected all, negatives)");
}

void TriageConfig::validate() const {
  if (!(q >= 0.0 && q <= 100.0))
    throw UsageError("q must lie in [0,100], got " + format_double(q));
  scoring.decision.validate();
}

std::size_t selected_count(double percent, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(percent * static_cast<double>(n) / 100.0));
}

std::vector<std::size_t> rank_by_score(const UncertaintyReport& report,
                                       std::vector<std::size_t> candidates) {
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    if (report.scores[a] != report.scores[b]) return report.scores[a] > report.scores[b];
    return report.example_ids[a] < report.example_ids[b];
  });
  return candidates;
}

namespace {

std::vector<std::size_t> predicted_negatives(const EnsembleDataset& dataset,
                                             const DecisionConfig& decision) {
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (predicted_label(dataset[i], decision) == 0) negatives.push_back(i);
  if (negatives.empty())
    throw DataError("dataset has no predicted negatives at tau = " + format_double(decision.tau));
  return negatives;
}

void check_report_covers(const EnsembleDataset& dataset, const UncertaintyReport& report) {
  if (report.size() != dataset.size() || report.example_ids.size() != dataset.size())
    throw DataError("uncertainty report does not cover the dataset");
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (report.example_ids[i] != dataset[i].example_id)
      throw DataError("uncertainty report out of order at example '" + dataset[i].example_id +
                      "'");
}

std::vector<std::string> top_negatives(const EnsembleDataset& dataset,
                                       const UncertaintyReport& report,
                                       const std::vector<std::size_t>& negatives, double q) {
  const auto ranked = rank_by_score(report, negatives);
  const std::size_t take = std::min(selected_count(q, negatives.size()), ranked.size());
  std::vector<std::string> ids;
  ids.reserve(take);
  for (std::size_t i = 0; i < take; ++i) ids.push_back(dataset[ranked[i]].example_id);
  return ids;
}

std::vector<std::string> union_of(std::vector<std::string> first,
                                  const std::vector<std::string>& second) {
  std::unordered_set<std::string> seen(first.begin(), first.end());
  for (const auto& id : second)
    if (seen.insert(id).second) first.push_back(id);
  return first;
}

std::vector<std::string> select_for(const EnsembleDataset& dataset, TriageMetric metric,
                                    const std::vector<UncertaintyReport>& reports,
                                    const std::vector<std::size_t>& negatives, double q) {
  // reports holds one entry per MetricKind, indexed by enum value.
  auto report_for = [&](MetricKind k) -> const UncertaintyReport& {
    return reports[static_cast<std::size_t>(k)];
  };
  switch (metric) {
    case TriageMetric::Mean: return top_negatives(dataset, report_for(MetricKind::Mean), negatives, q);
    case TriageMetric::Entropy:
      return top_negatives(dataset, report_for(MetricKind::Entropy), negatives, q);
    case TriageMetric::Var: return top_negatives(dataset, report_for(MetricKind::Var), negatives, q);
    case TriageMetric::Kl: return top_negatives(dataset, report_for(MetricKind::Kl), negatives, q);
    case TriageMetric::UnionMeanVar:
      return union_of(top_negatives(dataset, report_for(MetricKind::Mean), negatives, q),
                      top_negatives(dataset, report_for(MetricKind::Var), negatives, q));
  }
  return {};
}

std::vector<MetricKind> needed_metrics(TriageMetric metric) {
  switch (metric) {
    case TriageMetric::Mean: return {MetricKind::Mean};
    case TriageMetric::Entropy: return {MetricKind::Entropy};
    case TriageMetric::Var: return {MetricKind::Var};
    case TriageMetric::Kl: return {MetricKind::Kl};
    case TriageMetric::UnionMeanVar: return {MetricKind::Mean, MetricKind::Var};
  }
  return {};
}

std::vector<UncertaintyReport> reports_for(const EnsembleDataset& dataset,
                                           const std::vector<TriageMetric>& metrics,
                                           const ScoringOptions& scoring, int threads) {
  std::vector<UncertaintyReport> reports(4);
  std::array<bool, 4> done{};
  for (auto m : metrics)
    for (auto k : needed_metrics(m)) {
      const auto idx = static_cast<std::size_t>(k);
      if (!done[idx]) {
        reports[idx] = score_dataset(dataset, k, scoring, threads);
        done[idx] = true;
      }
    }
  return reports;
}

}  // namespace

std::vector<std::string> select_uncertain_negatives(const EnsembleDataset& dataset,
                                                    const UncertaintyReport& report, double q,
                                                    const DecisionConfig& decision) {
  if (!(q >= 0.0 && q <= 100.0)) throw UsageError("q must lie in [0,100], got " + format_double(q));
  check_report_covers(dataset, report);
  return top_negatives(dataset, report, predicted_negatives(dataset, decision), q);
}

std::vector<std::string> select_union_mean_var(const EnsembleDataset& dataset,
                                               const TriageConfig& cfg, int threads) {
  cfg.validate();
  const auto negatives = predicted_negatives(dataset, cfg.scoring.decision);
  const auto reports = reports_for(dataset, {TriageMetric::UnionMeanVar}, cfg.scoring, threads);
  return select_for(dataset, TriageMetric::UnionMeanVar, reports, negatives, cfg.q);
}

TriageOutcome triage_outcome_for(const EnsembleDataset& dataset,
                                 const std::vector<std::string>& flagged,
                                 const DecisionConfig& decision) {
  TriageOutcome out;
  std::unordered_map<std::string, bool> is_false_negative;
  for (const auto& r : dataset.records()) {
    if (predicted_label(r, decision) != 0) continue;
    ++out.n_negatives;
    const bool fn = r.label == 1;
    if (fn) ++out.n_false_neg_total;
    is_false_negative.emplace(r.example_id, fn);
  }
  out.n_uncertain = flagged.size();
  for (const auto& id : flagged) {
    auto it = is_false_negative.find(id);
    if (it == is_false_negative.end())
      throw DataError("flagged example '" + id + "' is not a predicted negative");
    if (it->second) ++out.n_false_neg_found;
  }
  out.n_false_neg_remaining = out.n_false_neg_total - out.n_false_neg_found;
  if (out.n_uncertain > 0)
    out.fnp = static_cast<double>(out.n_false_neg_found) / static_cast<double>(out.n_uncertain);
  out.reduction_pct = out.n_false_neg_total == 0
                          ? 0.0
                          : 100.0 * static_cast<double>(out.n_false_neg_found) /
                                static_cast<double>(out.n_false_neg_total);
  return out;
}

TriageOutcome evaluate_triage(const EnsembleDataset& dataset, const TriageConfig& cfg,
                              int threads) {
  cfg.validate();
  const auto negatives = predicted_negatives(dataset, cfg.scoring.decision);
  const auto reports = reports_for(dataset, {cfg.metric}, cfg.scoring, threads);
  const auto flagged = select_for(dataset, cfg.metric, reports, negatives, cfg.q);
  return triage_outcome_for(dataset, flagged, cfg.scoring.decision);
}

std::vector<TriageRow> evaluate_triage_grid(const EnsembleDataset& dataset,
                                            const std::vector<TriageMetric>& metrics,
                                            const std::vector<double>& qs,
                                            const ScoringOptions& scoring,
                                            const std::string& ensemble_tag, int threads) {
  for (double q : qs) TriageConfig{q, TriageMetric::Mean, scoring}.validate();
  scoring.decision.validate();
  const auto negatives = predicted_negatives(dataset, scoring.decision);
  const auto reports = reports_for(dataset, metrics, scoring, threads);

  std::vector<TriageRow> rows(metrics.size() * qs.size());
  const auto cells = static_cast<std::ptrdiff_t>(rows.size());
  [[maybe_unused]] const int workers = resolve_threads(threads);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::ptrdiff_t c = 0; c < cells; ++c) {
    const auto m = static_cast<std::size_t>(c) / qs.size();
    const auto qi = static_cast<std::size_t>(c) % qs.size();
    auto& row = rows[static_cast<std::size_t>(c)];
    row.ensemble_tag = ensemble_tag;
    row.q = qs[qi];
    row.metric = metrics[m];
    row.outcome = triage_outcome_for(
        dataset, select_for(dataset, metrics[m], reports, negatives, qs[qi]), scoring.decision);
  }
  return rows;
}

SeverityBreakdown severity_breakdown(const EnsembleDataset& dataset,
                                     const UncertaintyReport& report, double theta,
                                     Population population, const DecisionConfig& decision) {
  if (!(theta > 0.0 && theta <= 100.0))
    throw UsageError("theta must lie in (0,100], got " + format_double(theta));
  check_report_covers(dataset, report);
  for (const auto& r : dataset.records())
    if (!r.severity)
      throw DataError("example '" + r.example_id + "' has no severity level");

  std::vector<std::size_t> pool;
  if (population == Population::All) {
    pool.resize(dataset.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  } else {
    pool = predicted_negatives(dataset, decision);
  }
  const auto ranked = rank_by_score(report, std::move(pool));
  SeverityBreakdown out;
  out.theta = theta;
  out.n_selected = std::min(selected_count(theta, ranked.size()), ranked.size());
  std::array<std::size_t, 5> counts{};
  for (std::size_t i = 0; i < out.n_selected; ++i) ++counts[*dataset[ranked[i]].severity];
  for (std::size_t s = 0; s < 5; ++s)
    out.proportions[s] =
        static_cast<double>(counts[s]) / static_cast<double>(out.n_selected);
  return out;
}

std::vector<std::size_t> score_histogram(const std::vector<double>& scores, std::size_t bins,
                                         double lo, double hi) {
  if (bins < 1) throw UsageError("histogram needs at least one bin");
  if (!(lo < hi)) throw UsageError("histogram range must satisfy lo < hi");
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double s : scores) {
    const double pos = std::floor((s - lo) / width);
    std::size_t idx = 0;
    if (pos >= static_cast<double>(bins)) idx = bins - 1;
    else if (pos > 0.0) idx = static_cast<std::size_t>(pos);
    ++counts[idx];
  }
  return counts;
}

std::vector<std::size_t> score_histogram(const UncertaintyReport& report, std::size_t bins,
                                         double lo, double hi) {
  return score_histogram(report.scores, bins, lo, hi);
}

std::string triage_table_csv(const std::vector<TriageRow>& rows) {
  std::ostringstream out;
  out << "ensemble,q,metric,fn_found,n_uncertain,fnp_pct,remaining_fn,reduction_pct\n";
  for (const auto& row : rows) {
    const auto& o = row.outcome;
    out << row.ensemble_tag << ',' << format_double(row.q) << ',' << to_string(row.metric) << ','
        << o.n_false_neg_found << ',' << o.n_uncertain << ','
        << (o.fnp ? format_double(100.0 * *o.fnp) : std::string()) << ','
        << o.n_false_neg_remaining << ',' << format_double(o.reduction_pct) << '\n';
  }
  return out.str();
}

std::string histogram_csv(const std::vector<std::size_t>& counts, double lo, double hi) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  const double width = (hi - lo) / static_cast<double>(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double b_lo = lo + width * static_cast<double>(b);
    const double b_hi = b + 1 == counts.size() ? hi : lo + width * static_cast<double>(b + 1);
    out << format_double(b_lo) << ',' << format_double(b_hi) << ',' << counts[b] << '\n';
  }
  return out.str();
}

std::string severity_table_csv(
    const std::vector<std::pair<MetricKind, SeverityBreakdown>>& rows) {
  std::ostringstream out;
  out << "theta,metric,n_selected,sl0_pct,sl1_pct,sl2_pct,sl3_pct,sl4_pct\n";
  for (const auto& [metric, b] : rows) {
    out << format_double(b.theta) << ',' << to_string(metric) << ',' << b.n_selected;
    for (double p : b.proportions) out << ',' << format_double(100.0 * p);
    out << '\n';
  }
  return out.str();
}

}  // namespace etriage
