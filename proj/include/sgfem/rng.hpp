#pragma once

#include <cmath>
#include <cstdint>

namespace sgfem {

/// Deterministic standard-normal stream. Uses an explicit xorshift-based generator
/// and Box-Muller so sequences are identical across platforms and compilers.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {
    if (state_ == 0) state_ = 0x106689d45497fdb5ull;
  }

  /// Substream for an independent work item (e.g. one Monte Carlo sample).
  static GaussianSampler substream(std::uint64_t seed, std::uint64_t index) {
    return GaussianSampler(splitmix(seed) ^ splitmix(index * 0xbf58476d1ce4e5b9ull + 1));
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t next() {
    state_ ^= state_ << 13;
    state_ ^= state_ >> 7;
    state_ ^= state_ << 17;
    return state_;
  }

  double uniform_open() {
    // value in (0, 1): top 53 bits plus a half ulp offset
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sgfem
