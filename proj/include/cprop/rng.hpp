#pragma once

// Portable seeded randomness.
//
// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
// C++ standard. Floating-point draws are produced here rather than through
// <random> distributions (whose algorithms are implementation-defined):
//
//   uniform()       = (next() >> 11) * 2^-53          in [0, 1)
//   uniform_open()  = ((next() >> 11) + 1) * 2^-53    in (0, 1]
//   uniform(a, b)   = a + (b - a) * uniform()
//
// Independent streams are derived from a user seed with SplitMix64, see
// derive_seed(). Any implementation reproducing these three pieces reproduces
// every graph, coupling and value vector generated by this library.

#include <cstdint>
#include <random>

namespace cprop {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Tags for the independent random streams a run draws from.
enum class Stream : std::uint64_t {
  graph = 1,
  couplings = 2,
  values = 3,
  perturbation = 4,
  power_start = 5,
  member = 6,
};

/// Seed for sub-stream `index` of `stream` under `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL)) + index);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform_open() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::mt19937_64 engine_;
};

}  // namespace cprop
