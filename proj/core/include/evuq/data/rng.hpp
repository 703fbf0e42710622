#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace evuq::data {

/// Seed for a named sub-stream of a run seed ("data", "init", "latent", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Seeded 64-bit Mersenne twister with the draws the project needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream)
      : engine_(derive_seed(seed, stream)) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace evuq::data
