#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace hmmconf {

// SplitMix64 finalizer used to derive sub-seeds from a master seed and a
// counter. Iteration i of a run always sees mix_seed(master, i), so results
// do not depend on how work is scheduled across threads.
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) noexcept {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seedable generator with platform-independent sampling. std::mt19937_64 is
// bit-exact across implementations; the std::*_distribution adaptors are not,
// so the samplers below work from raw 64-bit draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform index in [0,n) via multiply-shift; bias is below n / 2^64.
  int uniform_index(int n) {
    using u128 = unsigned __int128;
    return static_cast<int>((u128(gen_()) * u128(static_cast<std::uint64_t>(n))) >> 64);
  }

  std::size_t uniform_index(std::size_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::size_t>((u128(gen_()) * u128(n)) >> 64);
  }

  // Sample an index from a probability row by CDF inversion.
  int categorical(std::span<const double> probs) {
    double u = uniform01();
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace hmmconf
