#include "camab/rng.h"

#include <cmath>
#include <numbers>

namespace camab {

uint64_t Rng::UniformInt(uint64_t bound) {
  if (bound <= 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double Rng::Gaussian() {
  // 1 - U lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t MixSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

uint64_t Fnv1a(uint64_t hash, std::string_view s) {
  for (unsigned char c : s) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace

uint64_t DeriveSeed(uint64_t run_seed, std::string_view instance_id,
                    std::string_view method) {
  uint64_t h = 0xcbf29ce484222325ULL;
  h = Fnv1a(h, instance_id);
  h = Fnv1a(h, std::string_view("\x1f", 1));
  h = Fnv1a(h, method);
  return MixSeed(h ^ MixSeed(run_seed));
}

}  // namespace camab
