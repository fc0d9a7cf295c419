#pragma once

#include <cstdint>
#include <random>

namespace scadasim {

// Deterministic random source. All draws go through explicit conversions of
// mt19937_64 output (the engine's sequence is pinned by the standard), so a
// given seed produces the same stream on every platform and build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo is fine here; bias is negligible for sim-scale n
    // and, more importantly, deterministic.
    return gen_() % n;
  }

  double uniform_between(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Derive an independent deterministic stream (splitmix64 of seed ^ stream).
  Rng fork(std::uint64_t stream) {
    std::uint64_t z = seed_mix_ ^ (stream + 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z = z ^ (z >> 31);
    return Rng(z);
  }

  static Rng forked(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed);
    return r.fork(stream);
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_mix_ = gen_();  // consumed once; decorrelates fork() from draws
};

}  // namespace scadasim
