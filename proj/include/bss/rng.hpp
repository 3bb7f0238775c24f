#ifndef BSS_RNG_HPP
#define BSS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace bss {

// Named substreams for the simulator's seed-splitting scheme. Every random
// draw in the toolkit flows from (seed, stream, index) so that scenes and
// estimator initializations are reproducible bit-exactly.
enum class Stream : std::uint64_t {
  kSource = 1,
  kFilter = 2,
  kNoise = 3,
  kSmmInit = 4,
  kSmmReseed = 5,
  kScene = 6,
};

// mt19937_64 wrapper with pinned uniform/gaussian mappings. The standard
// distributions are implementation-defined, so we map raw engine output
// ourselves to keep regression values stable across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(stream), index};
    engine_.seed(seq);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t integer(std::uint64_t n) {  // uniform in [0, n)
    return engine_() % n;
  }

  // Standard normal via Box-Muller; one spare value is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bss

#endif  // BSS_RNG_HPP
