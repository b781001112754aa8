#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rar {

// Deterministic RNG wrapper. std::mt19937_64 has a fully specified output
// sequence; the distributions below avoid std::uniform_real_distribution,
// whose output is implementation-defined, so seeded runs reproduce bitwise
// on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return gen_() % n; }

  // Box-Muller; deterministic given the engine state.
  double normal() {
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // Derive an independent stream, e.g. one per training step.
  Rng fork(std::uint64_t stream) const {
    return Rng(seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace rar
