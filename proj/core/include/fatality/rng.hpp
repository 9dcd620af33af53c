#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fatality {

// Named substreams derived from one master seed. Every random decision in a
// run draws from exactly one of these, so a single integer replays the run.
enum class Stream : std::uint64_t {
  kSplit = 1,
  kInit = 2,
  kShuffle = 3,
  kDropout = 4,
};

// splitmix64 finalizer applied to (seed, stream).
std::uint64_t derive_seed(std::uint64_t master, Stream stream) noexcept;

// Thin wrapper over std::mt19937_64. The engine output is fixed by the
// standard; the conversions below are written out so results do not depend
// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, Stream stream) : engine_(derive_seed(master, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Box-Muller (one value per call).
  double normal();

  // Normal(0, stddev) resampled until |x| <= 2*stddev.
  double truncated_normal(double stddev);

 private:
  std::mt19937_64 engine_;
};

// In-place Fisher-Yates shuffle.
void shuffle(std::vector<std::size_t>& values, Rng& rng);

}  // namespace fatality
