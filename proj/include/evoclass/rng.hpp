#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace evoclass {

// splitmix64 finalizer. Statistically solid for seeding and for counter
// keyed streams, and cheap enough to call per child / per image.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

// Named stream derivation: one master seed fans out into independent
// streams ("data", "init", "dne", "sgd-shuffle", ...) and counters.
// Counter-keyed so parallel consumers never share sequential state.
constexpr uint64_t derive(uint64_t seed, std::string_view tag) {
  return mix64(seed ^ fnv1a64(tag));
}

constexpr uint64_t derive(uint64_t seed, uint64_t counter) {
  return mix64(seed ^ (counter * 0xD1342543DE82EF95ull + 0x2545F4914F6CDD1Dull));
}

// splitmix64 sequence generator.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  // [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // [0, n)
  int next_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<uint64_t>(n)) >> 64);
  }

  // Standard normal via the Marsaglia polar method. Pair-cached; the
  // sequence is fully determined by the seed.
  float gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = static_cast<float>(v * m);
    has_cached_ = true;
    return static_cast<float>(u * m);
  }

 private:
  uint64_t state_;
  float cached_ = 0.0f;
  bool has_cached_ = false;
};

}  // namespace evoclass
