#include "shortlens/random.hpp"

#include <numeric>
#include <stdexcept>

namespace shortlens {

std::uint64_t PortableRng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("PortableRng::below: bound must be positive");
  // Reject the low (2^64 mod bound) values so every residue is equally likely.
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n, std::uint64_t seed) {
  if (n > population) throw std::invalid_argument("sample size exceeds population");
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  PortableRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

}  // namespace shortlens
