#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace misre {

/// splitmix64 step; the workhorse behind seed mixing and the Rng stream.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derive a substream seed from a root seed and a path of indices, so that
/// every hypothesis/trial/repetition owns an independent deterministic stream
/// regardless of evaluation order or worker count.
inline std::uint64_t substream(std::uint64_t seed,
                               std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = seed;
  for (std::uint64_t p : path) {
    std::uint64_t t = s ^ (0xD1B54A32D192ED03ULL + p);
    s = splitmix64(t) + p;
  }
  std::uint64_t u = s;
  return splitmix64(u);
}

/// Small deterministic generator. Not std::mt19937 on purpose: the stream is
/// pinned by this header, independent of the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  /// Two independent standard normals (Box-Muller).
  void normal_pair(double& a, double& b);

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double a, b;
    normal_pair(a, b);
    spare_ = b;
    have_spare_ = true;
    return a;
  }

  /// k distinct indices from [0, n), ascending (Floyd's sampling).
  std::vector<int> sample_distinct(int n, int k);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace misre
