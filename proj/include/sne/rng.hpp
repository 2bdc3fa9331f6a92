#pragma once

#include <cassert>
#include <cstdint>
#include <limits>
#include <random>

namespace sne {

// splitmix64 finalizer, used for deriving child stream seeds
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic RNG wrapper. std::mt19937_64 has a standard-mandated
// sequence; the helpers below avoid std::uniform_*_distribution, whose
// output is implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next() { return engine_(); }

  // uniform in [0, n), unbiased via rejection
  std::uint64_t below(std::uint64_t n) {
    assert(n > 0);
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  // uniform double in [0, 1)
  double canonical() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return canonical() < p; }

  template <typename C>
  const auto& pick(const C& c) {
    return c[index(c.size())];
  }

  // independent child stream, deterministic in (seed, stream)
  Rng split(std::uint64_t stream) const { return Rng(mix64(seed_ ^ mix64(stream))); }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sne
