#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rcp {

/// 64-bit finalizing mix used for seed derivation. Stable across platforms.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a base seed and a slot index. Children of the
/// same base never collide for distinct indices in practice, and the mapping
/// is pure, so independently seeded streams can be drawn in any order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 0x51ED270B35ULL));
}

/// Deterministic random stream over mt19937_64. The distribution transforms
/// are written out here instead of using the std:: distribution objects,
/// whose algorithms are implementation-defined and differ between standard
/// libraries; with a fixed seed this stream produces the same draws on any
/// conforming platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform index in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    std::size_t i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  /// Standard normal draw (Box-Muller, with the spare draw cached).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return radius * std::cos(theta);
  }

  /// Zero-mean normal draw with the given standard deviation, rejected until
  /// it falls inside [-bound, bound]. Returns 0 for a degenerate bound.
  double truncated_gaussian(double sigma, double bound) {
    if (sigma <= 0.0 || bound <= 0.0) {
      return 0.0;
    }
    while (true) {
      const double x = gaussian() * sigma;
      if (std::abs(x) <= bound) {
        return x;
      }
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rcp
