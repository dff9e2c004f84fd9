#include "misre/refine.hpp"

#include "misre/parallel.hpp"
#include "misre/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace misre {

namespace {

constexpr double kVarianceFloor = 1e-15;
constexpr int kMaxIterations = 100;

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

}  // namespace

// ---------------------------------------------------------------------------
// Reference kernel ops
// ---------------------------------------------------------------------------

double kde(double z, std::span<const double> projections,
           std::span<const double> variances, double sigma_hat) {
  const size_t n = projections.size();
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!(variances[i] > 0)) continue;
    const double u = (z - projections[i]) * (z - projections[i]) / variances[i];
    if (u <= 1.0) sum += 1.0 - u;
  }
  return sum / (static_cast<double>(n) * sigma_hat);
}

ModeResult mean_shift(double z0, std::span<const double> projections,
                      std::span<const double> variances, double sigma_hat,
                      int max_iterations) {
  const size_t n = projections.size();
  std::vector<double> tol_src;
  tol_src.reserve(n);
  for (size_t i = 0; i < n; ++i)
    if (variances[i] > 0) tol_src.push_back(std::sqrt(variances[i]));
  const double tol = 1e-6 * median_of(std::move(tol_src));

  ModeResult res;
  double z = z0;
  for (int it = 0; it < max_iterations; ++it) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (size_t i = 0; i < n; ++i) {
      if (!(variances[i] > 0)) continue;
      const double dz = z - projections[i];
      if (dz * dz <= variances[i]) {
        sum += projections[i];
        ++count;
      }
    }
    if (count == 0) {
      res.mode = z;
      res.kde_height = 0.0;
      res.iterations = it;
      res.no_support = (it == 0);
      return res;
    }
    const double z_new = sum / static_cast<double>(count);
#ifndef NDEBUG
    assert(kde(z_new, projections, variances, sigma_hat) + 1e-12 >=
           kde(z, projections, variances, sigma_hat));
#endif
    res.iterations = it + 1;
    if (std::abs(z_new - z) <= tol) {
      z = z_new;
      break;
    }
    z = z_new;
  }
  res.mode = z;
  res.kde_height = kde(z, projections, variances, sigma_hat);
  return res;
}

// ---------------------------------------------------------------------------
// ProjectionField
// ---------------------------------------------------------------------------

ProjectionField::ProjectionField(const CarrierTable& table,
                                 const Eigen::VectorXd& theta, double alpha,
                                 double sigma_eff) {
  n_ = table.size();
  sigma_ = sigma_eff;
  z_.resize(n_);
  radius_.resize(n_);

  const int zeta = table.spec().channel_count;
  for (int i = 0; i < n_; ++i) {
    // worst channel under this frame, matching the distance reduction
    double best_d = -1.0, best_z = 0.0, best_h = 0.0;
    for (int c = 0; c < zeta; ++c) {
      double z, h;
      table.project(c, i, theta, z, h);
      const double num = std::abs(z - alpha);
      double d;
      if (h <= kVarianceFloor)
        d = num > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0;
      else
        d = num / std::sqrt(h);
      if (d > best_d) {
        best_d = d;
        best_z = z;
        best_h = h;
      }
    }
    z_[i] = best_z;
    if (best_h <= kVarianceFloor) {
      radius_[i] = 0.0;
      ++excluded_count_;
    } else {
      radius_[i] = sigma_eff * std::sqrt(best_h);
    }
  }

  std::vector<int> order;
  order.reserve(n_);
  for (int i = 0; i < n_; ++i)
    if (radius_[i] > 0.0) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (z_[a] != z_[b]) return z_[a] < z_[b];
    return a < b;
  });
  zs_.resize(order.size());
  rs_.resize(order.size());
  std::vector<double> radii_sorted;
  radii_sorted.reserve(order.size());
  for (size_t k = 0; k < order.size(); ++k) {
    zs_[k] = z_[order[k]];
    rs_[k] = radius_[order[k]];
    radii_sorted.push_back(rs_[k]);
  }
  r_max_ = radii_sorted.empty()
               ? 0.0
               : *std::max_element(radii_sorted.begin(), radii_sorted.end());
  tol_ = 1e-6 * median_of(std::move(radii_sorted));
}

ProjectionField::WindowSum ProjectionField::window(double z) const {
  WindowSum w;
  if (zs_.empty()) return w;
  const auto lo =
      std::lower_bound(zs_.begin(), zs_.end(), z - r_max_) - zs_.begin();
  const auto hi =
      std::upper_bound(zs_.begin(), zs_.end(), z + r_max_) - zs_.begin();
  for (auto k = lo; k < hi; ++k) {
    const double dz = z - zs_[k];
    const double u = dz * dz / (rs_[k] * rs_[k]);
    if (u <= 1.0) {
      w.sum += zs_[k];
      ++w.count;
      w.kappa += 1.0 - u;
    }
  }
  return w;
}

double ProjectionField::kde_at(double z) const {
  return window(z).kappa / (static_cast<double>(n_) * sigma_);
}

ModeResult ProjectionField::mean_shift_from(double z0) const {
  ModeResult res;
  double z = z0;
  for (int it = 0; it < kMaxIterations; ++it) {
    const WindowSum w = window(z);
    if (w.count == 0) {
      res.mode = z;
      res.kde_height = 0.0;
      res.iterations = it;
      res.no_support = (it == 0);
      return res;
    }
    const double z_new = w.sum / static_cast<double>(w.count);
#ifndef NDEBUG
    assert(kde_at(z_new) + 1e-12 >= kde_at(z));
#endif
    res.iterations = it + 1;
    if (std::abs(z_new - z) <= tol_) {
      z = z_new;
      break;
    }
    z = z_new;
  }
  res.mode = z;
  res.kde_height = kde_at(z);
  return res;
}

// ---------------------------------------------------------------------------
// Refinement
// ---------------------------------------------------------------------------

RefineOutcome refine(const CarrierTable& table, const ScoredHypothesis& winner,
                     double sigma_eff, int trials, std::uint64_t seed,
                     RejectionCounters* counters, int threads) {
  // rows of the scale neighborhood; original indices in the table ascend,
  // so positions can be recovered by binary search
  const std::vector<int>& originals = table.original_indices();
  std::vector<int> neighborhood;
  for (const DistanceRecord& rec : winner.sorted_records) {
    if (rec.distance > sigma_eff) break;
    const auto it =
        std::lower_bound(originals.begin(), originals.end(), rec.point_index);
    neighborhood.push_back(static_cast<int>(it - originals.begin()));
  }
  std::sort(neighborhood.begin(), neighborhood.end());

  RefineOutcome out;
  if (static_cast<int>(neighborhood.size()) < table.spec().elemental_size) {
    out.theta = winner.hypothesis.theta;
    out.alpha = winner.hypothesis.alpha;
    out.fell_back = true;
    ProjectionField field(table, out.theta, out.alpha, sigma_eff);
    out.kde_height = field.kde_at(out.alpha);
    return out;
  }

  std::vector<Hypothesis> candidates;
  try {
    candidates = sample_hypotheses_from(table, neighborhood, trials, seed,
                                        counters, threads);
  } catch (const SamplingFailureError&) {
    out.theta = winner.hypothesis.theta;
    out.alpha = winner.hypothesis.alpha;
    out.fell_back = true;
    ProjectionField field(table, out.theta, out.alpha, sigma_eff);
    out.kde_height = field.kde_at(out.alpha);
    return out;
  }

  struct Trial {
    double mode = 0.0;
    double height = -1.0;
  };
  std::vector<Trial> results(candidates.size());
  parallel_for(0, static_cast<std::int64_t>(candidates.size()), threads,
               [&](std::int64_t lo, std::int64_t hi) {
                 for (std::int64_t j = lo; j < hi; ++j) {
                   const Hypothesis& h = candidates[j];
                   ProjectionField field(table, h.theta, h.alpha, sigma_eff);
                   const ModeResult mode = field.mean_shift_from(h.alpha);
                   results[j] = {mode.mode, mode.kde_height};
                 }
               });

  int best = 0;
  for (size_t j = 1; j < results.size(); ++j)
    if (results[j].height > results[best].height) best = static_cast<int>(j);

  out.theta = candidates[best].theta;
  out.alpha = results[best].mode;
  out.kde_height = results[best].height;
  out.trial_index = best;
  return out;
}

std::vector<int> classify_inliers(const CarrierTable& table,
                                  const Eigen::VectorXd& theta, double alpha,
                                  double sigma_eff, bool trajectories,
                                  int threads) {
  const ProjectionField field(table, theta, alpha, sigma_eff);
  const int n = table.size();
  std::vector<char> inlier(n, 0);
  parallel_for(0, n, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      if (field.excluded(i)) {
        // zero projected variance: on-locus points only
        inlier[i] = std::abs(field.projection(i) - alpha) <= 1e-12;
        continue;
      }
      if (trajectories) {
        const ModeResult mode = field.mean_shift_from(field.projection(i));
        inlier[i] = std::abs(mode.mode - alpha) <= field.radius(i);
      } else {
        inlier[i] = std::abs(field.projection(i) - alpha) <= field.radius(i);
      }
    }
  });
  std::vector<int> rows;
  for (int i = 0; i < n; ++i)
    if (inlier[i]) rows.push_back(i);
  return rows;
}

TlsFit tls_refit(const CarrierTable& table, std::span<const int> inlier_rows,
                 const Eigen::VectorXd& fallback_theta, double fallback_alpha) {
  const ModelSpec& spec = table.spec();
  const int m = spec.carrier_dim;
  const int zeta = spec.channel_count;

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  const std::int64_t rows =
      static_cast<std::int64_t>(inlier_rows.size()) * zeta;
  for (int r : inlier_rows)
    for (int c = 0; c < zeta; ++c) mean += table.carriers(c).row(r).transpose();
  mean /= static_cast<double>(rows);

  const bool centered = !spec.intercept_is_zero;
  for (int r : inlier_rows)
    for (int c = 0; c < zeta; ++c) {
      Eigen::VectorXd x = table.carriers(c).row(r).transpose();
      if (centered) x -= mean;
      scatter.noalias() += x * x.transpose();
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
  TlsFit fit;
  fit.theta = es.eigenvectors().col(0);
  fit.alpha = centered ? mean.dot(fit.theta) : 0.0;
  int imax = 0;
  fit.theta.cwiseAbs().maxCoeff(&imax);
  if (fit.theta(imax) < 0) {
    fit.theta = -fit.theta;
    fit.alpha = -fit.alpha;
  }

  if (!validate_constraints(spec, fit.theta, fit.alpha)) {
    fit.theta = fallback_theta;
    fit.alpha = fallback_alpha;
    fit.constraint_fallback = true;
  }

  double sigma = 0.0;
  for (int r : inlier_rows) {
    const double d = table.distance(r, fit.theta, fit.alpha).distance;
    if (std::isfinite(d)) sigma = std::max(sigma, d);
  }
  fit.sigma = sigma;
  return fit;
}

}  // namespace misre
