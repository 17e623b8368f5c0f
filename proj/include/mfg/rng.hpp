#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfg {

// Counter-based generator: every draw is a pure function of
// (seed, stream, a, b, c), so the schedule of a parallel loop cannot change
// which number a particle receives.
class CounterRng {
 public:
  // Named substreams; all randomness in one experiment derives from one seed.
  enum Stream : std::uint64_t {
    kNoise = 1,
    kInitial = 2,
    kPerturbation = 3,
    kSampler = 4,
    kAudit = 5,
  };

  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) const {
    std::uint64_t h = mix(seed_ ^ 0x9E3779B97F4A7C15ULL);
    h = mix(h ^ stream);
    h = mix(h ^ (a + 0x632BE59BD9B4E019ULL));
    h = mix(h ^ (b + 0x85157AF5ULL));
    h = mix(h ^ (c + 0xD6E8FEB86659FD93ULL));
    return h;
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0,
                 std::uint64_t c = 0) const {
    return (static_cast<double>(bits(stream, a, b, c) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two decorrelated counters.
  double normal(std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0,
                std::uint64_t c = 0) const {
    const double u1 = uniform(stream, a, b, 2 * c);
    const double u2 = uniform(stream, a, b, 2 * c + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace mfg
