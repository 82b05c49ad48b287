#pragma once

#include <cstdint>
#include <random>

namespace etriage {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the stream identified by (base, a, b); distinct tuples give
/// statistically independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

using Engine = std::mt19937_64;

/// Beta(alpha, beta) draws as X / (X + Y) with independent Gamma(alpha, 1)
/// and Gamma(beta, 1). Holds distribution state, so one sampler per stream.
class BetaSampler {
 public:
  BetaSampler(double alpha, double beta) : x_(alpha, 1.0), y_(beta, 1.0) {}

  double operator()(Engine& engine) {
    while (true) {
      const double x = x_(engine);
      const double y = y_(engine);
      // Both gammas can underflow to 0 for very small shapes.
      if (x + y > 0.0) return x / (x + y);
    }
  }

 private:
  std::gamma_distribution<double> x_;
  std::gamma_distribution<double> y_;
};

}  // namespace etriage
