#pragma once

#include <cstdint>

namespace agora {

// splitmix64. Self-contained so seeded runs are bit-identical across
// platforms and standard library versions (std::mt19937 distributions are
// not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // [0, n)
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Independent stream for job `index` under a master seed. Mixing the index
  // through the generator keeps per-job streams decorrelated, so experiments
  // can fan out across workers and still aggregate bit-identically.
  static Rng for_job(std::uint64_t master_seed, std::uint64_t index) {
    Rng mixer(master_seed ^ (0x5851f42d4c957f2dULL * (index + 1)));
    return Rng(mixer.next_u64());
  }

 private:
  std::uint64_t state_;
};

}  // namespace agora
