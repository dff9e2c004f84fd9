#include "misre/scale.hpp"

#include <algorithm>
#include <cmath>

namespace misre {

namespace {

constexpr int kMaxSegments = 10000;
constexpr int kEtaMax = 50;

int percentile_position(int n, double eta) {
  // ceil(eta * n / 100), 1-based
  double exact = eta * n / 100.0;
  if (eta == std::floor(eta)) {
    const long long e = static_cast<long long>(eta);
    return static_cast<int>((e * n + 99) / 100);
  }
  return static_cast<int>(std::ceil(exact));
}

}  // namespace

std::vector<std::int64_t> segment_counts(std::span<const double> sorted,
                                         double delta) {
  if (!(delta > 0)) throw InvalidInputError("segment width must be positive");
  std::vector<std::int64_t> counts;
  const std::int64_t n = static_cast<std::int64_t>(sorted.size());
  std::int64_t i = 0;
  for (int k = 1; i < n && k <= kMaxSegments; ++k) {
    const double upper = k * delta;
    std::int64_t c = 0;
    while (i < n && sorted[i] <= upper) {
      ++c;
      ++i;
    }
    counts.push_back(c);
  }
  return counts;
}

int expand(std::span<const double> sorted, double delta) {
  if (!(delta > 0)) throw InvalidInputError("segment width must be positive");
  const std::int64_t n = static_cast<std::int64_t>(sorted.size());
  std::int64_t i = 0;
  std::int64_t covered = 0;  // points in segments 1..k
  for (int k = 1; k < kMaxSegments; ++k) {
    const double upper = k * delta;
    while (i < n && sorted[i] <= upper) ++i;
    covered = i;
    // population of segment k+1
    std::int64_t j = i;
    const double next_upper = (k + 1) * delta;
    while (j < n && sorted[j] <= next_upper) ++j;
    const std::int64_t next = j - i;
    if (covered > 0 &&
        static_cast<double>(next) * k <= 0.5 * static_cast<double>(covered))
      return k;
  }
  return kMaxSegments;
}

ScaleEstimate estimate_scale(std::span<const double> sorted,
                             double epsilon_percent) {
  const int n = static_cast<int>(sorted.size());
  if (n < 1) throw InvalidInputError("empty distance sequence");
  if (!(epsilon_percent > 0) || epsilon_percent > kEtaMax)
    throw InvalidInputError("epsilon percent out of range");

  ScaleEstimate est;
  const int eta0 = static_cast<int>(std::ceil(epsilon_percent));
  for (int eta = eta0; eta <= kEtaMax; ++eta) {
    const int pos = std::min(percentile_position(n, eta), n);
    const double delta = sorted[pos - 1];
    if (!(delta > 0)) continue;  // duplicate points at this percentile
    const int k_t = expand(sorted, delta);
    est.records.push_back({eta, delta, k_t, k_t * delta});
    if (k_t >= 2 && est.eta_start < 0) est.eta_start = eta;
    if (est.eta_start >= 0) {
      if (k_t == 1) break;  // region of interest ends here
      est.eta_end = eta;
    }
  }

  if (est.eta_start < 0) {
    est.status = ScaleStatus::NoExpansion;
    const int pos = std::min(percentile_position(n, epsilon_percent), n);
    est.sigma = sorted[pos - 1];
    est.eta_end = -1;
    return est;
  }

  est.status = ScaleStatus::Normal;
  double best = 0.0;
  for (const auto& rec : est.records)
    if (rec.eta >= est.eta_start && rec.eta <= est.eta_end)
      best = std::max(best, rec.extent);
  est.sigma = std::min(best, sorted[n - 1]);
  return est;
}

}  // namespace misre
