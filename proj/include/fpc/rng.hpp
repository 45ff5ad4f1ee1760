#pragma once

#include <cmath>
#include <cstdint>

namespace fpc {

// Counter-based pseudo-random generator. Every draw is a pure function of
// (seed, counter), so streams can be sampled in any order, split across
// threads, and reproduced on any platform. The mixer is the splitmix64
// finalizer over the Weyl sequence seed + k * golden gamma.
class CounterRng {
 public:
  explicit CounterRng(uint64_t seed) : seed_(seed) {}

  uint64_t bits(uint64_t counter) const {
    uint64_t z = seed_ + (counter + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform(uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes counters 2k and 2k+1.
  double gaussian(uint64_t counter) const {
    double u1 = static_cast<double>((bits(2 * counter) >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // +1 or -1 equiprobable.
  double sign(uint64_t counter) const {
    return (bits(counter) >> 63) ? 1.0 : -1.0;
  }

 private:
  uint64_t seed_;
};

}  // namespace fpc
