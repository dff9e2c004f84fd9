#include "misre/rng.hpp"

#include <algorithm>
#include <cmath>

namespace misre {

void Rng::normal_pair(double& a, double& b) {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * M_PI * uniform();
  a = r * std::cos(phi);
  b = r * std::sin(phi);
}

std::vector<int> Rng::sample_distinct(int n, int k) {
  std::vector<int> out;
  out.reserve(k);
  // Floyd's algorithm: k draws, no retries.
  for (int j = n - k; j < n; ++j) {
    const int t = static_cast<int>(below(static_cast<std::uint64_t>(j) + 1));
    if (std::find(out.begin(), out.end(), t) != out.end())
      out.push_back(j);
    else
      out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace misre
