#pragma once

#include <cmath>
#include <cstdint>

namespace esm {

// SplitMix64 finalizer. Full-avalanche mix of a 64-bit word.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derive an independent 64-bit seed from (seed, tag, index). Used to key the
// per-purpose streams of a run (test points, per-rep data, per-rep fits)
// without any risk of two consumers sharing a sequence.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag, uint64_t index = 0) {
  return mix64(mix64(seed ^ 0x8ba563dbd2b4f1a7ULL) ^ (mix64(tag) + index));
}

// Counter-based stream: output k is mix64(base + k * odd constant). Streams
// with distinct (seed, stream_id) are decorrelated by the avalanche mix.
// Deterministic, copyable, no shared state.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(uint64_t seed, uint64_t stream_id)
      : state_(mix64(mix64(seed) ^ mix64(stream_id ^ 0x6a09e667f3bcc909ULL))) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1]: 53-bit mantissa, never returns 0 so log() is safe.
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Unbiased integer in [0, bound) via rejection.
  uint32_t uniform_below(uint32_t bound) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<uint32_t>(x % bound);
  }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cache_ = radius * std::sin(angle);
    has_cache_ = true;
    return radius * std::cos(angle);
  }

 private:
  uint64_t state_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

// Stream-id tags used by the simulation driver. Kept in one place so no two
// consumers of a root seed ever collide.
namespace stream_tag {
inline constexpr uint64_t kTestPoints = 0x7e57u;
inline constexpr uint64_t kRepData = 0xda7au;
inline constexpr uint64_t kRepFit = 0xf17u;
inline constexpr uint64_t kRetrain = 0x2e7au;
}  // namespace stream_tag

}  // namespace esm
