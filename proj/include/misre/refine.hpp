#pragma once

#include "misre/engine.hpp"
#include "misre/types.hpp"

#include <span>
#include <vector>

namespace misre {

/// Epanechnikov kernel density of projections at z, bandwidths given as
/// per-point variances. Points with non-positive variance are excluded.
double kde(double z, std::span<const double> projections,
           std::span<const double> variances, double sigma_hat);

/// Fixed-point iteration from z0 to the closest mode: each step averages the
/// projections whose window contains the current z. Empty starting window
/// returns z0 flagged no-support.
ModeResult mean_shift(double z0, std::span<const double> projections,
                      std::span<const double> variances, double sigma_hat = 1.0,
                      int max_iterations = 100);

/// One-dimensional projection field of a working set under a fixed direction:
/// per point, the worst-channel projection and its bandwidth. Window queries
/// run against projections sorted once at construction.
class ProjectionField {
 public:
  ProjectionField(const CarrierTable& table, const Eigen::VectorXd& theta,
                  double alpha, double sigma_eff);

  int size() const { return n_; }
  double projection(int row) const { return z_[row]; }
  double radius(int row) const { return radius_[row]; }  ///< sqrt of bandwidth
  bool excluded(int row) const { return radius_[row] <= 0.0; }
  int excluded_count() const { return excluded_count_; }
  double sigma() const { return sigma_; }

  double kde_at(double z) const;
  ModeResult mean_shift_from(double z0) const;

 private:
  struct WindowSum {
    double sum = 0.0;
    std::int64_t count = 0;
    double kappa = 0.0;
  };
  WindowSum window(double z) const;

  int n_ = 0;
  double sigma_ = 1.0;
  double tol_ = 0.0;
  double r_max_ = 0.0;
  int excluded_count_ = 0;
  std::vector<double> z_;       // per row
  std::vector<double> radius_;  // per row, 0 marks excluded
  std::vector<double> zs_;      // sorted projections (included points)
  std::vector<double> rs_;      // radii aligned with zs_
};

struct RefineOutcome {
  Eigen::VectorXd theta;
  double alpha = 0.0;
  double kde_height = 0.0;
  int trial_index = -1;
  bool fell_back = false;  ///< neighborhood too small, winner reused
};

/// Re-estimate a structure with trials drawn from the scale neighborhood of
/// the winning hypothesis; returns the direction and converged mode of the
/// trial with the highest density.
RefineOutcome refine(const CarrierTable& table, const ScoredHypothesis& winner,
                     double sigma_eff, int trials, std::uint64_t seed,
                     RejectionCounters* counters = nullptr, int threads = 1);

/// Points whose own mean-shift trajectory converges into the scale band
/// around alpha. Returns table rows, ascending.
std::vector<int> classify_inliers(const CarrierTable& table,
                                  const Eigen::VectorXd& theta, double alpha,
                                  double sigma_eff, bool trajectories = true,
                                  int threads = 1);

struct TlsFit {
  Eigen::VectorXd theta;
  double alpha = 0.0;
  double sigma = 0.0;  ///< largest inlier distance under the fitted frame
  bool constraint_fallback = false;
};

/// Total-least-squares refit over classified inliers: direction from the
/// smallest eigenvector of the centered carrier scatter, intercept from the
/// mean projection. Falls back to the given frame when the refit violates
/// model constraints.
TlsFit tls_refit(const CarrierTable& table, std::span<const int> inlier_rows,
                 const Eigen::VectorXd& fallback_theta, double fallback_alpha);

}  // namespace misre
