#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace dpdiag {

// Counter-based 64-bit generator ("splitmix64-counter"): draw i is the
// splitmix64 finalizer applied to key + (i+1) * golden gamma. The key is
// folded from a tuple of seed words, so streams keyed by different tuples
// (seed, step, stream id, ...) are independent, and a stream is fully
// determined by its tuple. Integer output is platform-stable; Gaussian
// output additionally depends on libm's log/cos.
class CounterRng {
 public:
  static constexpr const char* kName = "splitmix64-counter";

  explicit CounterRng(uint64_t seed) : state_(derive_key({seed})) {}
  CounterRng(std::initializer_list<uint64_t> key_words)
      : state_(derive_key(key_words)) {}

  uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // Uniform in [0, 1), 53 bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in the open interval (0, 1); safe to pass to log().
  double next_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes exactly two draws.
  double next_gaussian() {
    const double u1 = next_open01();
    const double u2 = next_open01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Uniform integer in [0, n) by 128-bit multiply-shift. n must be > 0.
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // splitmix64 finalizer.
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  static uint64_t derive_key(std::initializer_list<uint64_t> words) {
    uint64_t key = 0x8E51FA8A1C7D39E3ULL;
    for (uint64_t w : words) key = mix((key ^ mix(w)) + kGolden);
    return key;
  }

  uint64_t state_;
};

// Stream ids keep unrelated consumers of the same seed from colliding.
namespace rng_stream {
inline constexpr uint64_t kDatasetMeans = 1;
inline constexpr uint64_t kDatasetNoise = 2;
inline constexpr uint64_t kParamInit = 3;
inline constexpr uint64_t kShard = 4;
inline constexpr uint64_t kGradNoise = 5;
inline constexpr uint64_t kSketchRow = 6;
}  // namespace rng_stream

}  // namespace dpdiag
