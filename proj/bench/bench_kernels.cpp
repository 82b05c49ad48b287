// Serial reference vs OpenMP kernels: Monte Carlo mis-ranking and dataset scoring.
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <random>
#include <vector>

#include "etriage/beta_sim.hpp"
#include "etriage/data_model.hpp"
#include "etriage/parallel.hpp"
#include "etriage/uncertainty_metrics.hpp"

namespace {

template <typename F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace etriage;
  const std::uint64_t trials = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
  const int threads = resolve_threads(0);
  std::cout << "threads " << threads << "\n";

  const std::vector<std::size_t> grid{5, 10, 20, 50};
  const MonteCarloConfig mc{trials, 7, 0};
  std::vector<MisrankEstimate> serial, parallel;
  const double t_serial = time_ms([&] {
    serial = simulate_misranking_serial({2, 8}, {4, 6}, grid, mc);
  });
  const double t_parallel = time_ms([&] {
    parallel = simulate_misranking({2, 8}, {4, 6}, grid, mc);
  });
  bool same = serial.size() == parallel.size();
  for (std::size_t k = 0; same && k < serial.size(); ++k)
    same = serial[k].p_mean == parallel[k].p_mean && serial[k].p_var == parallel[k].p_var &&
           serial[k].delta_var_mc == parallel[k].delta_var_mc;
  std::cout << std::fixed << std::setprecision(1);
  std::cout << "misranking  trials=" << trials << "  serial " << t_serial << " ms  parallel "
            << t_parallel << " ms  speedup " << t_serial / t_parallel
            << (same ? "  (identical)" : "  (MISMATCH)") << "\n";

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PredictionRecord> records(200000);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].example_id = "x" + std::to_string(i);
    records[i].label = u(rng) < 0.3 ? 1 : 0;
    records[i].members.resize(16);
    for (auto& y : records[i].members) y = u(rng);
  }
  const EnsembleDataset dataset(std::move(records));
  for (auto metric : {MetricKind::Entropy, MetricKind::Var, MetricKind::Kl}) {
    UncertaintyReport a, b;
    const double ts = time_ms([&] { a = score_dataset_serial(dataset, metric, {}); });
    const double tp = time_ms([&] { b = score_dataset(dataset, metric, {}); });
    std::cout << "score " << std::setw(7) << to_string(metric) << "  N=" << dataset.size()
              << " K=16  serial " << ts << " ms  parallel " << tp << " ms  speedup " << ts / tp
              << (a.scores == b.scores ? "  (identical)" : "  (MISMATCH)") << "\n";
  }
  return same ? 0 : 1;
}
