#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace deltagan {

/// The single seeded source of randomness. Everything stochastic in the
/// pipeline (splits, augmentation, buffer replay, torch initialisation)
/// draws from an instance of this type.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

  /// Seeds torch's global generator from this stream.
  void seed_torch();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace deltagan
