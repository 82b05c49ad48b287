#include "etriage/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "etriage/beta_sim.hpp"
#include "etriage/data_model.hpp"
#include "etriage/error.hpp"
#include "etriage/io.hpp"
#include "etriage/triage_eval.hpp"
#include "etriage/uncertainty_metrics.hpp"

namespace etriage::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20200915;

// Options shared by the dataset-driven subcommands.
struct DatasetArgs {
  std::string input;
  double tau = 0.5;
  double epsilon = 1e-12;
  bool kl_literal = false;
  bool no_severity_check = false;

  ScoringOptions scoring() const {
    ScoringOptions s;
    s.decision.tau = tau;
    s.decision.clamp_epsilon = epsilon;
    s.kl_mode = kl_literal ? KlMode::Literal : KlMode::Full;
    s.decision.validate();
    return s;
  }

  EnsembleDataset load() const {
    return load_dataset(input, LoadOptions{!no_severity_check});
  }

  ordered_json to_json() const {
    return {{"input", input},
            {"tau", tau},
            {"clamp_epsilon", epsilon},
            {"kl_mode", kl_literal ? "literal" : "full"},
            {"severity_check", !no_severity_check}};
  }
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& args) {
  cmd->add_option("--input,-i", args.input, "Prediction CSV (example_id,label,severity,y_1..y_K)")
      ->required();
  cmd->add_option("--tau", args.tau, "Decision threshold in (0,1)");
  cmd->add_option("--epsilon", args.epsilon, "Probability clamp before logarithms");
  cmd->add_flag("--kl-literal", args.kl_literal, "KL metric with the single p*log(p/q) term");
  cmd->add_flag("--no-severity-check", args.no_severity_check,
                "Accept labels that disagree with the severity grade");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto& item : io::split(text, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !std::isfinite(v))
      throw UsageError(std::string("cannot parse ") + what + " value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  for (double v : parse_doubles(text, what)) {
    if (v < 0 || v != std::floor(v))
      throw UsageError(std::string(what) + " values must be nonnegative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

ordered_json manifest(const std::string& command, ordered_json config,
                      const io::OutputSet& outputs) {
  ordered_json doc;
  doc["tool"] = "etriage";
  doc["command"] = command;
  doc["config"] = std::move(config);
  auto files = ordered_json::array();
  for (const auto& [path, contents] : outputs.files()) files.push_back(path.filename().string());
  doc["outputs"] = std::move(files);
  return doc;
}

void commit_with_manifest(io::OutputSet& outputs, const fs::path& out_dir,
                          const std::string& command, ordered_json config) {
  auto doc = manifest(command, std::move(config), outputs);
  outputs.add(out_dir / "manifest.json", doc.dump(2) + "\n");
  outputs.commit();
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("ET_SEED"); env && *env) {
    char* end = nullptr;
    const auto value = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw UsageError(std::string("invalid ET_SEED '") + env + "'");
    return value;
  }
  return kDefaultSeed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble uncertainty scoring, false-negative triage and beta-model checks",
               "etriage"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_dir = "etriage_out";
  int threads = 0;
  app.add_option("--out,-o", out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", threads, "Worker cap (0 = available parallelism)")
      ->check(CLI::NonNegativeNumber);

  // score
  DatasetArgs score_args;
  std::string score_metrics = "mean";
  auto* score = app.add_subcommand("score", "Per-example uncertainty scores");
  add_dataset_options(score, score_args);
  score->add_option("--metric,-m", score_metrics, "Comma list of mean,entropy,var,kl");

  // triage
  DatasetArgs triage_args;
  std::string triage_q = "1,2,5,10,15";
  std::string triage_metrics = "mean,var,union";
  std::string tag = "ensemble";
  auto* triage = app.add_subcommand("triage", "False-negative triage table over a (metric, q) grid");
  add_dataset_options(triage, triage_args);
  triage->add_option("--q", triage_q, "Comma list of uncertain-negative rates in percent");
  triage->add_option("--metrics", triage_metrics, "Comma list of mean,entropy,var,kl,union");
  triage->add_option("--tag", tag, "Ensemble tag written in the first column");

  // severity
  DatasetArgs sev_args;
  std::string sev_theta = "1,5,10";
  std::string sev_metrics = "mean,var";
  std::string population = "all";
  auto* severity = app.add_subcommand("severity", "Severity mix of the top-theta% ranked examples");
  add_dataset_options(severity, sev_args);
  severity->add_option("--theta", sev_theta, "Comma list of percentages in (0,100]");
  severity->add_option("--metrics", sev_metrics, "Comma list of mean,entropy,var,kl");
  severity->add_option("--population", population, "Rank over 'all' examples or 'negatives'");

  // histogram
  DatasetArgs hist_args;
  std::string hist_metric = "mean";
  std::size_t bins = 20;
  std::optional<double> hist_lo, hist_hi;
  auto* histogram = app.add_subcommand("histogram", "Histogram of uncertainty scores");
  add_dataset_options(histogram, hist_args);
  histogram->add_option("--metric,-m", hist_metric, "mean, entropy, var or kl");
  histogram->add_option("--bins", bins, "Number of equal-width bins");
  histogram->add_option("--lo", hist_lo, "Range start (default 0)");
  histogram->add_option("--hi", hist_hi, "Range end (default: largest score)");

  // fit-beta
  DatasetArgs fit_args;
  std::optional<double> fit_c;
  auto* fit = app.add_subcommand("fit-beta", "Fit a beta distribution to each example's members");
  add_dataset_options(fit, fit_args);
  fit->add_option("--c", fit_c, "Fix alpha + beta to this constant");

  // verify-theory
  VerificationConfig vcfg;
  std::string n_grid = "5,10,20,50";
  std::optional<std::uint64_t> seed;
  auto* verify = app.add_subcommand("verify-theory", "Analytic and Monte Carlo checks of the beta model");
  verify->add_option("--alpha-i", vcfg.alpha_i, "alpha of the less ambiguous input");
  verify->add_option("--alpha-j", vcfg.alpha_j, "alpha of the more ambiguous input");
  verify->add_option("--c", vcfg.c, "Shared alpha + beta");
  verify->add_option("--tau", vcfg.tau, "Decision threshold for the margin score");
  verify->add_option("--n", n_grid, "Comma list of ensemble sizes");
  verify->add_option("--trials", vcfg.mc.trials, "Monte Carlo trials per ensemble size");
  verify->add_option("--seed", seed, "Seed (falls back to ET_SEED)");
  verify->add_option("--corollary-n", vcfg.corollary_n, "Large ensemble size, 0 disables");
  verify->add_option("--corollary-trials", vcfg.corollary_trials, "Trials for the large-n check");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "etriage: " << e.what() << "\n";
    return kUsageError;
  }

  const fs::path out_path(out_dir);
  try {
    io::OutputSet outputs;

    if (score->parsed()) {
      const auto scoring = score_args.scoring();
      std::vector<MetricKind> metrics;
      for (const auto& m : split_list(score_metrics)) metrics.push_back(parse_metric(m));
      if (metrics.empty()) throw UsageError("no metric given");
      const auto dataset = score_args.load();
      for (auto m : metrics) {
        const auto report = score_dataset(dataset, m, scoring, threads);
        const std::string stem = "scores_" + std::string(to_string(m));
        outputs.add(out_path / (stem + ".csv"), report_to_csv(report));
        outputs.add(out_path / (stem + ".json"), report_to_json(report));
        outputs.add(out_path / (stem + ".meta.json"), report_sidecar_json(report));
      }
      auto cfg = score_args.to_json();
      cfg["metrics"] = split_list(score_metrics);
      commit_with_manifest(outputs, out_path, "score", cfg);
      out << "scored " << dataset.size() << " examples (K=" << dataset.ensemble_size()
          << ") into " << out_path.string() << "\n";
      return kSuccess;
    }

    if (triage->parsed()) {
      const auto scoring = triage_args.scoring();
      const auto qs = parse_doubles(triage_q, "q");
      for (double q : qs) TriageConfig{q, TriageMetric::Mean, scoring}.validate();
      std::vector<TriageMetric> metrics;
      for (const auto& m : split_list(triage_metrics)) metrics.push_back(parse_triage_metric(m));
      if (metrics.empty()) throw UsageError("no metric given");
      const auto dataset = triage_args.load();
      const auto rows = evaluate_triage_grid(dataset, metrics, qs, scoring, tag, threads);
      outputs.add(out_path / "triage.csv", triage_table_csv(rows));
      auto cfg = triage_args.to_json();
      cfg["q"] = qs;
      cfg["metrics"] = split_list(triage_metrics);
      cfg["tag"] = tag;
      commit_with_manifest(outputs, out_path, "triage", cfg);
      out << triage_table_csv(rows);
      return kSuccess;
    }

    if (severity->parsed()) {
      const auto scoring = sev_args.scoring();
      const auto thetas = parse_doubles(sev_theta, "theta");
      for (double t : thetas)
        if (!(t > 0.0 && t <= 100.0)) throw UsageError("theta must lie in (0,100]");
      const auto pop = parse_population(population);
      std::vector<MetricKind> metrics;
      for (const auto& m : split_list(sev_metrics)) metrics.push_back(parse_metric(m));
      if (metrics.empty()) throw UsageError("no metric given");
      const auto dataset = sev_args.load();
      std::vector<std::pair<MetricKind, SeverityBreakdown>> rows;
      for (double t : thetas)
        for (auto m : metrics) {
          const auto report = score_dataset(dataset, m, scoring, threads);
          rows.emplace_back(m, severity_breakdown(dataset, report, t, pop, scoring.decision));
        }
      outputs.add(out_path / "severity.csv", severity_table_csv(rows));
      auto cfg = sev_args.to_json();
      cfg["theta"] = thetas;
      cfg["metrics"] = split_list(sev_metrics);
      cfg["population"] = population;
      commit_with_manifest(outputs, out_path, "severity", cfg);
      out << severity_table_csv(rows);
      return kSuccess;
    }

    if (histogram->parsed()) {
      const auto scoring = hist_args.scoring();
      const auto metric = parse_metric(hist_metric);
      if (bins < 1) throw UsageError("--bins must be at least 1");
      const auto dataset = hist_args.load();
      const auto report = score_dataset(dataset, metric, scoring, threads);
      const double lo = hist_lo.value_or(0.0);
      double hi = 0.0;
      if (hist_hi) {
        hi = *hist_hi;
      } else {
        hi = *std::max_element(report.scores.begin(), report.scores.end());
        if (!(hi > lo)) hi = lo + 1.0;
      }
      const auto counts = score_histogram(report, bins, lo, hi);
      outputs.add(out_path / ("histogram_" + std::string(to_string(metric)) + ".csv"),
                  histogram_csv(counts, lo, hi));
      auto cfg = hist_args.to_json();
      cfg["metric"] = to_string(metric);
      cfg["bins"] = bins;
      cfg["lo"] = lo;
      cfg["hi"] = hi;
      commit_with_manifest(outputs, out_path, "histogram", cfg);
      out << histogram_csv(counts, lo, hi);
      return kSuccess;
    }

    if (fit->parsed()) {
      const auto scoring = fit_args.scoring();
      if (fit_c && !(*fit_c > 0.0)) throw UsageError("--c must be positive");
      const auto dataset = fit_args.load();
      std::ostringstream csv;
      csv << "example_id,alpha,beta,mean,variance,status\n";
      std::size_t fitted = 0;
      for (const auto& r : dataset.records()) {
        csv << r.example_id << ',';
        try {
          const auto p = fit_beta(r.members, fit_c, scoring.decision.clamp_epsilon);
          const auto m = beta_moments(p.alpha, p.beta);
          csv << format_double(p.alpha) << ',' << format_double(p.beta) << ','
              << format_double(m.mean) << ',' << format_double(m.variance) << ",ok\n";
          ++fitted;
        } catch (const std::exception& e) {
          std::string why = e.what();
          std::replace(why.begin(), why.end(), ',', ';');
          csv << ",,,," << "unfittable: " << why << '\n';
        }
      }
      outputs.add(out_path / "fit_beta.csv", csv.str());
      auto cfg = fit_args.to_json();
      cfg["c"] = fit_c ? ordered_json(*fit_c) : ordered_json(nullptr);
      commit_with_manifest(outputs, out_path, "fit-beta", cfg);
      out << "fitted " << fitted << " of " << dataset.size() << " examples\n";
      return kSuccess;
    }

    if (verify->parsed()) {
      vcfg.n_grid = parse_sizes(n_grid, "n");
      vcfg.mc.seed = resolve_seed(seed);
      vcfg.mc.threads = threads;
      const auto report = verify_theory(vcfg);
      for (const auto& w : report.warnings) err << "etriage: warning: " << w << "\n";
      outputs.add(out_path / "theory_report.json", verification_json(report));
      outputs.add(out_path / "theory_report.csv", verification_csv(report));
      outputs.add(out_path / "theory_assertions.csv", assertions_csv(report));
      ordered_json cfg = {{"alpha_i", vcfg.alpha_i},
                          {"alpha_j", vcfg.alpha_j},
                          {"c", vcfg.c},
                          {"tau", vcfg.tau},
                          {"n_grid", vcfg.n_grid},
                          {"trials", vcfg.mc.trials},
                          {"seed", vcfg.mc.seed},
                          {"corollary_n", vcfg.corollary_n},
                          {"corollary_trials", vcfg.corollary_trials}};
      commit_with_manifest(outputs, out_path, "verify-theory", cfg);
      for (const auto& a : report.assertions)
        out << (a.status == AssertionStatus::Pass   ? "PASS "
                : a.status == AssertionStatus::Fail ? "FAIL "
                                                    : "SKIP ")
            << a.name << "  " << a.detail << "\n";
      return report.any_failed() ? kAssertionFailure : kSuccess;
    }
  } catch (const UsageError& e) {
    err << "etriage: usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "etriage: error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace etriage::cli
