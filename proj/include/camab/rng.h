#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace camab {

// Portable random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; every derived draw (uniform doubles,
// bounded integers, Gaussians) is computed here rather than through the
// <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  uint64_t UniformInt(uint64_t bound);

  // Standard normal via Box-Muller. Consumes exactly two uniforms per call;
  // the second variate is discarded so the stream position depends only on
  // the number of calls.
  double Gaussian();

  double Gaussian(double mean, double stddev) {
    return mean + stddev * Gaussian();
  }

  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to decorrelate derived seeds.
uint64_t MixSeed(uint64_t x);

// Seed for one (instance, method) pair of a run. Independent of scheduling
// order: FNV-1a over the two strings, folded with the run seed.
uint64_t DeriveSeed(uint64_t run_seed, std::string_view instance_id,
                    std::string_view method);

}  // namespace camab
