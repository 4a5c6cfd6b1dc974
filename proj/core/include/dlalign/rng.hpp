#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dlalign {

// Seeded RNG with hand-rolled distributions so that streams are
// reproducible across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  // standard normal via Box-Muller, cached second value
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // derive an independent stream, e.g. one per environment
  Rng split(std::uint64_t stream) const {
    std::uint64_t x = seed_mix_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return Rng(x);
  }

  void note_seed(std::uint64_t s) { seed_mix_ = s; }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_mix_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

inline Rng make_rng(std::uint64_t seed) {
  Rng r(seed);
  r.note_seed(seed);
  return r;
}

}  // namespace dlalign
