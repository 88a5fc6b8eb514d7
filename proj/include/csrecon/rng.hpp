#pragma once

// Seeded draws with a fully pinned algorithm chain: mt19937_64, the 53-bit
// mantissa mapping to (0,1], and Box-Muller normals. Standard-library
// distributions are avoided because their output is implementation-defined;
// everything seeded in this library routes through this class so that a
// (seed, scheme) pair regenerates identical values.

#include <cmath>
#include <cstdint>
#include <random>

namespace csr {

class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on (0,1].
  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1p-53;
  }

  // Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform index in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    const auto idx = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return idx >= n ? n - 1 : idx;
  }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable seed mixing (splitmix64 step) for deriving per-line / per-purpose streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace csr
