#pragma once

// Deterministic random source. All stochastic choices in the library go
// through Rng so that runs are reproducible from a single seed and the full
// generator state can be checkpointed as text.

#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace regent {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(a) ^ b);
}

// inclusive integer range, used for configurable draw bounds
struct IntRange {
  int lo = 1, hi = 1;
};

// Wraps mt19937_64 behind explicit draw helpers. Distribution classes from
// <random> are avoided on purpose: their draw counts are implementation
// defined, which would break bit-exact checkpoint/resume.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // uniform in [0, 1), 53 bits
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform in [0, n); n must be positive
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  // uniform in [lo, hi], inclusive
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool coin() { return (engine_() >> 32 & 1u) != 0; }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates over an index-addressable container.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t derive_seed() { return mix_seed(engine_()); }

  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (!is) throw std::runtime_error("bad rng state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace regent
