#include "etriage/beta_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "etriage/data_model.hpp"
#include "etriage/error.hpp"
#include "etriage/parallel.hpp"
#include "etriage/rng.hpp"
#include "etriage/uncertainty_metrics.hpp"

namespace etriage {

void BetaEnsembleSpec::validate() const {
  if (!(params.alpha > 0.0) || !(params.beta > 0.0))
    throw UsageError("beta parameters must be positive");
  if (ensemble_size < 2) throw UsageError("ensemble size must be at least 2");
  if (trials < 1) throw UsageError("trial count must be at least 1");
}

BetaMoments beta_moments(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw UsageError("beta parameters must be positive, got (" + format_double(alpha) + ", " +
                     format_double(beta) + ")");
  const double sum = alpha + beta;
  const double mean = alpha / sum;
  return {mean, mean * (1.0 - mean) / (1.0 + sum)};
}

void check_theorem_preconditions(double alpha_i, double alpha_j, double c) {
  if (!(alpha_i > 0.0))
    throw UsageError("alpha_i must be positive, got " + format_double(alpha_i));
  if (!(alpha_i < alpha_j))
    throw UsageError("need alpha_i < alpha_j, got alpha_i = " + format_double(alpha_i) +
                     ", alpha_j = " + format_double(alpha_j));
  if (!(alpha_j <= c - alpha_j))
    throw UsageError("need alpha_j <= beta_j (alpha_j <= c/2), got alpha_j = " +
                     format_double(alpha_j) + ", c = " + format_double(c));
}

PairwiseTheory pairwise_theory(double alpha_i, double alpha_j, double c, std::size_t n,
                               double tau) {
  check_theorem_preconditions(alpha_i, alpha_j, c);
  if (n < 1) throw UsageError("ensemble size must be positive");
  PairwiseTheory t;
  t.alpha_i = alpha_i;
  t.alpha_j = alpha_j;
  t.c = c;
  t.n = n;
  t.tau = tau;
  const auto mi = beta_moments(alpha_i, c - alpha_i);
  const auto mj = beta_moments(alpha_j, c - alpha_j);
  t.mu_i = mi.mean;
  t.mu_j = mj.mean;
  t.sigma_i = mi.variance;
  t.sigma_j = mj.variance;
  t.delta_mean = t.mu_j - t.mu_i;
  // Same denominator 1 + c on both sides; subtracting the numerators first
  // keeps the sign exact for nearly equal alphas.
  t.delta_var = (t.mu_j * (1.0 - t.mu_j) - t.mu_i * (1.0 - t.mu_i)) / (1.0 + c);
  t.bound_mean =
      (t.sigma_i + t.sigma_j) / (static_cast<double>(n) * t.delta_mean * t.delta_mean);
  return t;
}

double binomial_standard_error(double p, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

namespace {

constexpr std::uint64_t kPartitionTrials = 256;

struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const RunningStats& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double total = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / total;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / total;
    count += o.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

struct Partial {
  std::uint64_t mis_mean_halves = 0;  // 2 per strict mis-rank, 1 per tie
  std::uint64_t mis_var_halves = 0;
  std::uint64_t ties_mean = 0;
  std::uint64_t ties_var = 0;
  std::uint64_t agree = 0;
  RunningStats mean_i, mean_j, var_i, var_j;

  void merge(const Partial& o) {
    mis_mean_halves += o.mis_mean_halves;
    mis_var_halves += o.mis_var_halves;
    ties_mean += o.ties_mean;
    ties_var += o.ties_var;
    agree += o.agree;
    mean_i.merge(o.mean_i);
    mean_j.merge(o.mean_j);
    var_i.merge(o.var_i);
    var_j.merge(o.var_j);
  }
};

void record_trial(Partial& acc, std::span<const double> xi, std::span<const double> xj,
                  double tau) {
  const double smi = margin_score(ensemble_output(xi), tau);
  const double smj = margin_score(ensemble_output(xj), tau);
  const double svi = sample_variance(xi);
  const double svj = sample_variance(xj);
  if (smi > smj) {
    acc.mis_mean_halves += 2;
  } else if (smi == smj) {
    ++acc.mis_mean_halves;
    ++acc.ties_mean;
  }
  if (svi > svj) {
    acc.mis_var_halves += 2;
  } else if (svi == svj) {
    ++acc.mis_var_halves;
    ++acc.ties_var;
  }
  if ((smi < smj) == (svi < svj)) ++acc.agree;
  acc.mean_i.push(smi);
  acc.mean_j.push(smj);
  acc.var_i.push(svi);
  acc.var_j.push(svj);
}

std::uint64_t partition_count(std::uint64_t trials) {
  return (trials + kPartitionTrials - 1) / kPartitionTrials;
}

std::uint64_t partition_trials(std::uint64_t trials, std::uint64_t p) {
  return std::min(kPartitionTrials, trials - p * kPartitionTrials);
}

MisrankEstimate finish(std::size_t n, std::uint64_t trials, const Partial& total) {
  MisrankEstimate e;
  e.n = n;
  e.trials = trials;
  const double t = static_cast<double>(trials);
  e.p_mean = static_cast<double>(total.mis_mean_halves) / (2.0 * t);
  e.p_var = static_cast<double>(total.mis_var_halves) / (2.0 * t);
  e.se_mean = binomial_standard_error(e.p_mean, trials);
  e.se_var = binomial_standard_error(e.p_var, trials);
  e.ties_mean = total.ties_mean;
  e.ties_var = total.ties_var;
  e.agreement = static_cast<double>(total.agree) / t;
  e.se_agreement = binomial_standard_error(e.agreement, trials);
  e.delta_mean_mc = total.mean_j.mean - total.mean_i.mean;
  e.delta_var_mc = total.var_j.mean - total.var_i.mean;
  e.var_s_mean_i = total.mean_i.variance();
  e.var_s_mean_j = total.mean_j.variance();
  e.var_s_var_i = total.var_i.variance();
  e.var_s_var_j = total.var_j.variance();
  return e;
}

void validate_simulation(const BetaParams& a, const BetaParams& b,
                         std::span<const std::size_t> n_grid, const MonteCarloConfig& mc,
                         double tau, SimulationMode mode) {
  if (!(a.alpha > 0.0 && a.beta > 0.0 && b.alpha > 0.0 && b.beta > 0.0))
    throw UsageError("beta parameters must be positive");
  if (mode == SimulationMode::Theorem) {
    if (a.sum() != b.sum())
      throw UsageError("both inputs must share alpha + beta, got " + format_double(a.sum()) +
                       " and " + format_double(b.sum()));
    check_theorem_preconditions(a.alpha, b.alpha, b.sum());
  }
  if (n_grid.empty()) throw UsageError("empty ensemble-size grid");
  for (std::size_t n : n_grid)
    if (n < 2) throw UsageError("ensemble sizes must be at least 2, got " + std::to_string(n));
  if (mc.trials < 1) throw UsageError("trial count must be at least 1");
  if (!(tau > 0.0 && tau < 1.0)) throw UsageError("tau must lie in (0,1)");
}

}  // namespace

std::vector<MisrankEstimate> simulate_misranking(const BetaParams& input_i,
                                                 const BetaParams& input_j,
                                                 std::span<const std::size_t> n_grid,
                                                 const MonteCarloConfig& mc, double tau,
                                                 SimulationMode mode) {
  validate_simulation(input_i, input_j, n_grid, mc, tau, mode);
  const auto partitions = partition_count(mc.trials);
  [[maybe_unused]] const int workers = resolve_threads(mc.threads);
  std::vector<MisrankEstimate> out;
  out.reserve(n_grid.size());
  for (std::size_t n : n_grid) {
    std::vector<Partial> partials(partitions);
#pragma omp parallel num_threads(workers)
    {
      std::vector<double> xi(n), xj(n);
#pragma omp for schedule(dynamic)
      for (std::int64_t p = 0; p < static_cast<std::int64_t>(partitions); ++p) {
        const auto part = static_cast<std::uint64_t>(p);
        Engine engine(derive_seed(mc.seed, n, part));
        BetaSampler draw_i(input_i.alpha, input_i.beta);
        BetaSampler draw_j(input_j.alpha, input_j.beta);
        Partial& acc = partials[part];
        const auto count = partition_trials(mc.trials, part);
        for (std::uint64_t t = 0; t < count; ++t) {
          for (auto& x : xi) x = draw_i(engine);
          for (auto& x : xj) x = draw_j(engine);
          record_trial(acc, xi, xj, tau);
        }
      }
    }
    Partial total;
    for (const auto& part : partials) total.merge(part);
    out.push_back(finish(n, mc.trials, total));
  }
  return out;
}

std::vector<MisrankEstimate> simulate_misranking_serial(const BetaParams& input_i,
                                                        const BetaParams& input_j,
                                                        std::span<const std::size_t> n_grid,
                                                        const MonteCarloConfig& mc, double tau,
                                                        SimulationMode mode) {
  validate_simulation(input_i, input_j, n_grid, mc, tau, mode);
  std::vector<MisrankEstimate> out;
  for (std::size_t n : n_grid) {
    Partial total;
    for (std::uint64_t p = 0; p < partition_count(mc.trials); ++p) {
      Engine engine(derive_seed(mc.seed, n, p));
      BetaSampler draw_i(input_i.alpha, input_i.beta);
      BetaSampler draw_j(input_j.alpha, input_j.beta);
      Partial acc;
      for (std::uint64_t t = 0; t < partition_trials(mc.trials, p); ++t) {
        std::vector<double> xi(n), xj(n);
        for (std::size_t k = 0; k < n; ++k) xi[k] = draw_i(engine);
        for (std::size_t k = 0; k < n; ++k) xj[k] = draw_j(engine);
        record_trial(acc, xi, xj, tau);
      }
      total.merge(acc);
    }
    out.push_back(finish(n, mc.trials, total));
  }
  return out;
}

PairwiseTheory with_var_bound(PairwiseTheory theory, const MisrankEstimate& estimate) {
  theory.bound_var =
      (estimate.var_s_var_i + estimate.var_s_var_j) / (theory.delta_var * theory.delta_var);
  return theory;
}

AgreementEstimate corollary_check(double alpha_i, double alpha_j, double c, std::size_t n_large,
                                  const MonteCarloConfig& mc, double tau) {
  check_theorem_preconditions(alpha_i, alpha_j, c);
  if (n_large < 1000)
    throw UsageError("corollary check needs n_large >= 1000, got " + std::to_string(n_large));
  const std::size_t grid[] = {n_large};
  const auto est = simulate_misranking({alpha_i, c - alpha_i}, {alpha_j, c - alpha_j}, grid, mc,
                                       tau, SimulationMode::Theorem);
  return {n_large, mc.trials, est.front().agreement, est.front().se_agreement};
}

BetaParams fit_beta_moments(double mean, double variance) {
  if (!(mean > 0.0 && mean < 1.0))
    throw DataError("cannot fit a beta distribution: mean " + format_double(mean) +
                    " outside (0,1)");
  if (!(variance > 0.0))
    throw DataError("cannot fit a beta distribution: zero sample variance (point mass)");
  const double spread = mean * (1.0 - mean);
  if (!(variance < spread))
    throw DataError("cannot fit a beta distribution: variance " + format_double(variance) +
                    " >= m(1-m) = " + format_double(spread));
  const double common = spread / variance - 1.0;
  return {mean * common, (1.0 - mean) * common};
}

BetaParams fit_beta(std::span<const double> samples, std::optional<double> fixed_sum,
                    double clamp_epsilon) {
  if (samples.size() < 2) throw DataError("beta fit needs at least 2 samples");
  std::vector<double> clamped(samples.begin(), samples.end());
  for (auto& x : clamped) {
    if (!(x >= 0.0 && x <= 1.0))
      throw DataError("beta fit sample " + format_double(x) + " outside [0,1]");
    x = std::clamp(x, clamp_epsilon, 1.0 - clamp_epsilon);
  }
  const double mean = ensemble_output(clamped);
  const double variance = sample_variance(clamped);
  if (!fixed_sum) return fit_beta_moments(mean, variance);
  if (!(*fixed_sum > 0.0)) throw UsageError("fixed sum c must be positive");
  if (!(variance > 0.0))
    throw DataError("cannot fit a beta distribution: zero sample variance (point mass)");
  return {*fixed_sum * mean, *fixed_sum * (1.0 - mean)};
}

// ---------------------------------------------------------------------------

void VerificationConfig::validate() const {
  check_theorem_preconditions(alpha_i, alpha_j, c);
  if (!(tau > 0.0 && tau < 1.0)) throw UsageError("tau must lie in (0,1)");
  if (n_grid.empty()) throw UsageError("empty ensemble-size grid");
  for (std::size_t n : n_grid)
    if (n < 2) throw UsageError("ensemble sizes must be at least 2, got " + std::to_string(n));
  if (mc.trials < 1) throw UsageError("trial count must be at least 1");
  if (corollary_n != 0 && corollary_n < 1000)
    throw UsageError("corollary ensemble size must be 0 (off) or >= 1000");
  if (corollary_n != 0 && corollary_trials < 1)
    throw UsageError("corollary trial count must be at least 1");
  if (!(z > 0.0)) throw UsageError("z must be positive");
}

std::string to_string(AssertionStatus status) {
  switch (status) {
    case AssertionStatus::Pass: return "pass";
    case AssertionStatus::Fail: return "fail";
    case AssertionStatus::Skipped: return "skipped";
  }
  return "unknown";
}

bool VerificationReport::any_failed() const {
  return std::any_of(assertions.begin(), assertions.end(),
                     [](const Assertion& a) { return a.status == AssertionStatus::Fail; });
}

namespace {

Assertion check(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok ? AssertionStatus::Pass : AssertionStatus::Fail, std::move(detail)};
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

}  // namespace

VerificationReport verify_theory(const VerificationConfig& config) {
  config.validate();
  VerificationReport report;
  report.config = config;
  auto grid = config.n_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  report.config.n_grid = grid;

  const BetaParams in_i{config.alpha_i, config.c - config.alpha_i};
  const BetaParams in_j{config.alpha_j, config.c - config.alpha_j};
  const auto base = pairwise_theory(config.alpha_i, config.alpha_j, config.c, grid.front(),
                                    config.tau);
  report.assertions.push_back(check(
      "theorem_ordering", base.ordering_holds(),
      "delta_mean=" + fmt(base.delta_mean) + " delta_var=" + fmt(base.delta_var)));

  report.estimates = simulate_misranking(in_i, in_j, grid, config.mc, config.tau);
  for (std::size_t k = 0; k < grid.size(); ++k)
    report.theory.push_back(with_var_bound(
        pairwise_theory(config.alpha_i, config.alpha_j, config.c, grid[k], config.tau),
        report.estimates[k]));

  const bool mc_ok = config.mc.trials >= config.min_trials;
  if (!mc_ok)
    report.warnings.push_back("trials = " + std::to_string(config.mc.trials) + " < " +
                              std::to_string(config.min_trials) +
                              ": standard errors too large, Monte Carlo assertions skipped");

  const double z = config.z;
  auto skipped = [](std::string name, std::string why) {
    return Assertion{std::move(name), AssertionStatus::Skipped, std::move(why)};
  };
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& e = report.estimates[k];
    const auto& t = report.theory[k];
    const std::string suffix = "_n" + std::to_string(e.n);
    if (!mc_ok) {
      report.assertions.push_back(skipped("mean_not_worse_than_var" + suffix, "too few trials"));
      report.assertions.push_back(skipped("chebyshev_mean" + suffix, "too few trials"));
      report.assertions.push_back(skipped("chebyshev_var" + suffix, "too few trials"));
      continue;
    }
    const double combined = std::hypot(e.se_mean, e.se_var);
    if (e.n >= 10) {
      report.assertions.push_back(check(
          "mean_not_worse_than_var" + suffix, e.p_var - e.p_mean >= z * combined,
          "p_mean=" + fmt(e.p_mean) + " p_var=" + fmt(e.p_var) + " margin>=" + fmt(z * combined)));
    } else {
      report.assertions.push_back(check("mean_not_worse_than_var" + suffix, e.p_mean <= e.p_var,
                                        "p_mean=" + fmt(e.p_mean) + " p_var=" + fmt(e.p_var)));
    }
    if (t.bound_mean <= 1.0)
      report.assertions.push_back(check("chebyshev_mean" + suffix,
                                        e.p_mean <= t.bound_mean + z * e.se_mean,
                                        "p_mean=" + fmt(e.p_mean) + " bound=" + fmt(t.bound_mean)));
    else
      report.assertions.push_back(skipped("chebyshev_mean" + suffix, "bound > 1 is vacuous"));
    if (*t.bound_var <= 1.0)
      report.assertions.push_back(check("chebyshev_var" + suffix,
                                        e.p_var <= *t.bound_var + z * e.se_var,
                                        "p_var=" + fmt(e.p_var) + " bound=" + fmt(*t.bound_var)));
    else
      report.assertions.push_back(skipped("chebyshev_var" + suffix, "bound > 1 is vacuous"));
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const auto& a = report.estimates[k - 1];
    const auto& b = report.estimates[k];
    const std::string name =
        "mean_decay_n" + std::to_string(a.n) + "_to_n" + std::to_string(b.n);
    if (!mc_ok) {
      report.assertions.push_back(skipped(name, "too few trials"));
      continue;
    }
    report.assertions.push_back(check(name, b.p_mean <= a.p_mean + z * std::hypot(a.se_mean, b.se_mean),
                                      "p_mean " + fmt(a.p_mean) + " -> " + fmt(b.p_mean)));
  }

  if (config.corollary_n != 0) {
    MonteCarloConfig cmc = config.mc;
    cmc.trials = config.corollary_trials;
    report.corollary = corollary_check(config.alpha_i, config.alpha_j, config.c,
                                       config.corollary_n, cmc, config.tau);
    const std::string name = "corollary_agreement_n" + std::to_string(config.corollary_n);
    if (config.corollary_trials < config.min_trials)
      report.assertions.push_back(skipped(name, "too few trials"));
    else
      report.assertions.push_back(check(
          name, report.corollary->agreement >= config.corollary_min_agreement,
          "agreement=" + fmt(report.corollary->agreement) +
              " required>=" + fmt(config.corollary_min_agreement)));
  }
  return report;
}

std::string verification_json(const VerificationReport& report) {
  using nlohmann::ordered_json;
  const auto& cfg = report.config;
  ordered_json doc;
  doc["parameters"] = {{"alpha_i", cfg.alpha_i},
                       {"alpha_j", cfg.alpha_j},
                       {"c", cfg.c},
                       {"beta_i", cfg.c - cfg.alpha_i},
                       {"beta_j", cfg.c - cfg.alpha_j},
                       {"tau", cfg.tau},
                       {"n_grid", cfg.n_grid},
                       {"trials", cfg.mc.trials},
                       {"seed", cfg.mc.seed},
                       {"z", cfg.z},
                       {"corollary_n", cfg.corollary_n},
                       {"corollary_trials", cfg.corollary_trials}};
  auto rows = ordered_json::array();
  for (std::size_t k = 0; k < report.estimates.size(); ++k) {
    const auto& t = report.theory[k];
    const auto& e = report.estimates[k];
    rows.push_back({{"n", e.n},
                    {"mu_i", t.mu_i},
                    {"mu_j", t.mu_j},
                    {"sigma_i", t.sigma_i},
                    {"sigma_j", t.sigma_j},
                    {"delta_mean", t.delta_mean},
                    {"delta_var", t.delta_var},
                    {"delta_mean_mc", e.delta_mean_mc},
                    {"delta_var_mc", e.delta_var_mc},
                    {"bound_mean", t.bound_mean},
                    {"bound_var", t.bound_var.value_or(0.0)},
                    {"p_mean", e.p_mean},
                    {"se_mean", e.se_mean},
                    {"p_var", e.p_var},
                    {"se_var", e.se_var},
                    {"ties_mean", e.ties_mean},
                    {"ties_var", e.ties_var},
                    {"agreement", e.agreement}});
  }
  doc["ensemble_sizes"] = std::move(rows);
  if (report.corollary)
    doc["corollary"] = {{"n", report.corollary->n},
                        {"trials", report.corollary->trials},
                        {"agreement", report.corollary->agreement},
                        {"standard_error", report.corollary->standard_error}};
  else
    doc["corollary"] = nullptr;
  auto asserts = ordered_json::array();
  for (const auto& a : report.assertions)
    asserts.push_back({{"name", a.name}, {"status", to_string(a.status)}, {"detail", a.detail}});
  doc["assertions"] = std::move(asserts);
  doc["warnings"] = report.warnings;
  doc["passed"] = !report.any_failed();
  return doc.dump(2) + "\n";
}

std::string verification_csv(const VerificationReport& report) {
  std::ostringstream out;
  out << "alpha_i,alpha_j,c,n,delta_mean,delta_var,delta_mean_mc,delta_var_mc,bound_mean,"
         "bound_var,p_mean,se_mean,p_var,se_var,agreement,trials\n";
  const auto& cfg = report.config;
  for (std::size_t k = 0; k < report.estimates.size(); ++k) {
    const auto& t = report.theory[k];
    const auto& e = report.estimates[k];
    out << format_double(cfg.alpha_i) << ',' << format_double(cfg.alpha_j) << ','
        << format_double(cfg.c) << ',' << e.n << ',' << format_double(t.delta_mean) << ','
        << format_double(t.delta_var) << ',' << format_double(e.delta_mean_mc) << ','
        << format_double(e.delta_var_mc) << ',' << format_double(t.bound_mean) << ','
        << format_double(t.bound_var.value_or(0.0)) << ',' << format_double(e.p_mean) << ','
        << format_double(e.se_mean) << ',' << format_double(e.p_var) << ','
        << format_double(e.se_var) << ',' << format_double(e.agreement) << ',' << e.trials
        << '\n';
  }
  return out.str();
}

std::string assertions_csv(const VerificationReport& report) {
  std::ostringstream out;
  out << "assertion,status,detail\n";
  for (const auto& a : report.assertions)
    out << a.name << ',' << to_string(a.status) << ",\"" << a.detail << "\"\n";
  return out.str();
}

}  // namespace etriage
