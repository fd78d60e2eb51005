#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace splat {

// Seeded 64-bit generator with a fixed double conversion so draws do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, stream): used for per-tile generators so
  // serial and parallel runs draw identical numbers.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32), 0x5eedu};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return Rng((static_cast<std::uint64_t>(words[1]) << 32) | words[0]);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace splat
