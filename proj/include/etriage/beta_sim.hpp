#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace etriage {

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;

  double sum() const { return alpha + beta; }
};

/// One input of the beta ensemble model: member predictions are i.i.d.
/// Beta(alpha, beta) draws, `ensemble_size` of them per trial.
struct BetaEnsembleSpec {
  BetaParams params;
  std::size_t ensemble_size = 2;
  std::uint64_t trials = 1;
  std::uint64_t seed = 0;

  double c() const { return params.sum(); }
  void validate() const;
};

struct BetaMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Closed-form mean a/(a+b) and variance mean(1-mean)/(1+a+b).
BetaMoments beta_moments(double alpha, double beta);

/// Throws UsageError unless 0 < alpha_i < alpha_j <= c/2.
void check_theorem_preconditions(double alpha_i, double alpha_j, double c);

/// Analytic comparison of two inputs sharing alpha + beta = c, where x_j is
/// the more ambiguous one. delta_mean uses the linear form mu_j - mu_i.
struct PairwiseTheory {
  double alpha_i = 0.0, alpha_j = 0.0, c = 0.0;
  std::size_t n = 0;
  double tau = 0.5;
  double mu_i = 0.0, mu_j = 0.0;
  double sigma_i = 0.0, sigma_j = 0.0;
  double delta_mean = 0.0;
  double delta_var = 0.0;
  // Chebyshev bound (Var s(x_i) + Var s(x_j)) / delta^2 with Var s_MEAN = sigma / n.
  double bound_mean = 0.0;
  // Same bound for VAR; the variance of the sample variance comes from
  // simulation, see with_var_bound().
  std::optional<double> bound_var;

  bool ordering_holds() const { return delta_mean > delta_var && delta_var > 0.0; }
};

PairwiseTheory pairwise_theory(double alpha_i, double alpha_j, double c, std::size_t n,
                               double tau = 0.5);

struct MonteCarloConfig {
  std::uint64_t trials = 100000;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = OpenMP default
};

enum class SimulationMode {
  Theorem,     // enforce 0 < alpha_i < alpha_j <= beta_j and equal sums
  Diagnostic,  // any positive parameters
};

/// Mis-ranking frequencies P(s(x_i) > s(x_j)) for one ensemble size, ties
/// counted as half an event.
struct MisrankEstimate {
  std::size_t n = 0;
  std::uint64_t trials = 0;
  double p_mean = 0.0;
  double p_var = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;
  std::uint64_t ties_mean = 0;
  std::uint64_t ties_var = 0;
  // Fraction of trials where MEAN and VAR order the pair the same way.
  double agreement = 0.0;
  double se_agreement = 0.0;
  // Sample estimates of E[s(x_j) - s(x_i)] under the exact metric definitions.
  double delta_mean_mc = 0.0;
  double delta_var_mc = 0.0;
  // Sample variances of the per-trial scores.
  double var_s_mean_i = 0.0, var_s_mean_j = 0.0;
  double var_s_var_i = 0.0, var_s_var_j = 0.0;
};

/// sqrt(p(1-p)/trials).
double binomial_standard_error(double p, std::uint64_t trials);

/// Trials are split into fixed-size partitions, each with its own stream
/// derived from (seed, n, partition); partitions run on OpenMP workers and
/// are merged in index order, so results do not depend on the thread count.
std::vector<MisrankEstimate> simulate_misranking(const BetaParams& input_i,
                                                 const BetaParams& input_j,
                                                 std::span<const std::size_t> n_grid,
                                                 const MonteCarloConfig& mc, double tau = 0.5,
                                                 SimulationMode mode = SimulationMode::Theorem);

/// Single-threaded reference for simulate_misranking: one fresh sample
/// vector per trial, same streams. Must agree bit for bit.
std::vector<MisrankEstimate> simulate_misranking_serial(
    const BetaParams& input_i, const BetaParams& input_j, std::span<const std::size_t> n_grid,
    const MonteCarloConfig& mc, double tau = 0.5,
    SimulationMode mode = SimulationMode::Theorem);

/// Upper bound for the VAR mis-ranking probability using the simulated
/// variances of the sample variance.
PairwiseTheory with_var_bound(PairwiseTheory theory, const MisrankEstimate& estimate);

struct AgreementEstimate {
  std::size_t n = 0;
  std::uint64_t trials = 0;
  double agreement = 0.0;
  double standard_error = 0.0;
};

/// Large-ensemble agreement between the MEAN and VAR orderings. Requires
/// the theorem preconditions and n_large >= 1000.
AgreementEstimate corollary_check(double alpha_i, double alpha_j, double c, std::size_t n_large,
                                  const MonteCarloConfig& mc, double tau = 0.5);

/// Method-of-moments inversion. Throws DataError when variance <= 0 or
/// variance >= mean(1-mean).
BetaParams fit_beta_moments(double mean, double variance);

/// Fits Beta to samples (clamped to [eps, 1-eps]). With `fixed_sum` the fit
/// is alpha = c*m, beta = c*(1-m).
BetaParams fit_beta(std::span<const double> samples,
                    std::optional<double> fixed_sum = std::nullopt,
                    double clamp_epsilon = 1e-12);

// ---------------------------------------------------------------------------
// Verification report

struct VerificationConfig {
  double alpha_i = 2.0;
  double alpha_j = 4.0;
  double c = 10.0;
  double tau = 0.5;
  std::vector<std::size_t> n_grid{5, 10, 20, 50};
  MonteCarloConfig mc{100000, 20200915, 0};
  std::size_t corollary_n = 10000;  // 0 disables the check
  std::uint64_t corollary_trials = 10000;
  double corollary_min_agreement = 0.99;
  std::uint64_t min_trials = 1000;  // below this MC assertions are skipped
  double z = 3.0;                   // standard errors of slack

  void validate() const;
};

enum class AssertionStatus { Pass, Fail, Skipped };
std::string to_string(AssertionStatus status);

struct Assertion {
  std::string name;
  AssertionStatus status = AssertionStatus::Skipped;
  std::string detail;
};

struct VerificationReport {
  VerificationConfig config;
  std::vector<PairwiseTheory> theory;  // one per n, bound_var filled in
  std::vector<MisrankEstimate> estimates;
  std::optional<AgreementEstimate> corollary;
  std::vector<Assertion> assertions;
  std::vector<std::string> warnings;

  bool any_failed() const;
};

VerificationReport verify_theory(const VerificationConfig& config);

std::string verification_json(const VerificationReport& report);
/// One row per ensemble size.
std::string verification_csv(const VerificationReport& report);
std::string assertions_csv(const VerificationReport& report);

}  // namespace etriage
