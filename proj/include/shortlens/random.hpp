#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace shortlens {

/// Seeded generator with a bit-exact definition on every platform: the
/// standard 64-bit Mersenne Twister (std::mt19937_64) for raw draws, and
/// our own rejection sampler for bounded integers, since the standard
/// distributions are implementation-defined.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

/// Draws n distinct indices from [0, population) uniformly without
/// replacement (partial Fisher-Yates). Order is the draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n, std::uint64_t seed);

}  // namespace shortlens
