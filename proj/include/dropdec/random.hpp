#pragma once

#include <cmath>
#include <cstdint>

namespace dropdec {

// Deterministic 64-bit random stream (splitmix64). The standard library's
// distributions are implementation-defined, so everything here is built from
// raw bits to keep traces byte-identical across platforms and toolchains.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) using the top 53 bits of one draw.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Bernoulli draw; consumes exactly one uniform regardless of p.
  bool next_bernoulli(double p) { return next_double() < p; }

  // Standard Gaussian via Box-Muller; consumes exactly two uniforms.
  double next_gaussian() {
    double u1 = 1.0 - next_double();  // in (0, 1], keeps the log finite
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Hash-combines extra words into a seed so that distinct (seed, parts...)
  // tuples give statistically independent streams.
  template <typename... Parts>
  static std::uint64_t derive(std::uint64_t seed, Parts... parts) {
    std::uint64_t s = mix(seed + 0x9e3779b97f4a7c15ull);
    ((s = mix(s ^ (static_cast<std::uint64_t>(parts) +
                   0x9e3779b97f4a7c15ull))),
     ...);
    return s;
  }

  // Independent stream for one (generation step, ensemble candidate) cell.
  // Masks depend only on these coordinates, never on how many draws some
  // other candidate consumed, which is what makes serial and parallel
  // execution bit-identical.
  static RandomStream substream(std::uint64_t master_seed, std::uint64_t step,
                                std::uint64_t candidate) {
    return RandomStream(derive(master_seed, step, candidate));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace dropdec
