#pragma once

#include "misre/models.hpp"
#include "misre/types.hpp"

#include <span>
#include <vector>

namespace misre {

/// Packed carriers of a working point set: per channel, an n x m matrix of
/// carrier vectors and an (n*l) x m stack of transposed whitened Jacobians,
/// laid out for batched projection. Rows address the current working set;
/// original input indices are kept alongside.
class CarrierTable {
 public:
  CarrierTable(const ModelSpec& spec, std::span<const Eigen::VectorXd> points,
               std::span<const Eigen::MatrixXd> covariances = {});

  /// Table restricted to a subset of rows (one pipeline iteration's
  /// remaining points).
  CarrierTable subset(std::span<const int> rows) const;

  const ModelSpec& spec() const { return *spec_; }
  int size() const { return n_; }
  int original_index(int row) const { return original_index_[row]; }
  const std::vector<int>& original_indices() const { return original_index_; }

  const Eigen::MatrixXd& carriers(int channel) const { return x_[channel]; }
  /// Whitened Jacobian of one row and channel (l x m, transposed layout).
  Eigen::Block<const Eigen::MatrixXd> jac_t(int channel, int row) const {
    return jt_[channel].middleRows(static_cast<Eigen::Index>(row) * l_, l_);
  }
  bool identity_jacobian() const { return identity_jacobian_; }

  /// Largest Mahalanobis distance over channels for one row.
  DistanceRecord distance(int row, const Eigen::VectorXd& theta,
                          double alpha) const;

  /// Batched distances for every row; out spans must have length size().
  /// Channel output is optional.
  void distances(const Eigen::VectorXd& theta, double alpha,
                 std::span<double> out, std::span<int> channel_out = {}) const;

  /// Stack the carriers of an elemental subset for solve_elemental.
  Eigen::MatrixXd stack_rows(std::span<const int> rows) const;

  /// Projection z = x^T theta and variance h = theta^T C theta of one row
  /// and channel.
  void project(int channel, int row, const Eigen::VectorXd& theta, double& z,
               double& h) const;

 private:
  CarrierTable() = default;
  const ModelSpec* spec_ = nullptr;
  int n_ = 0;
  int l_ = 0;
  bool identity_jacobian_ = false;
  std::vector<Eigen::MatrixXd> x_;   // per channel, n x m
  std::vector<Eigen::MatrixXd> jt_;  // per channel, (n*l) x m
  std::vector<int> original_index_;
};

/// Largest Mahalanobis distance over the channels of one lifted point.
/// Channels with vanishing projected variance contribute +inf when off the
/// locus and 0 on it.
DistanceRecord mahalanobis(const CarrierSet& carrier_set, const Hypothesis& h);

/// Sum of the n_eps smallest max-channel distances under one hypothesis,
/// via bounded-heap selection.
double score_hypothesis(const CarrierTable& table, const Hypothesis& h,
                        int n_eps);

/// Score all hypotheses and return the minimum-sum one (ties resolved by
/// hypothesis index) with its full ascending distance sequence attached.
ScoredHypothesis select_best(const CarrierTable& table,
                             std::span<const Hypothesis> hypotheses, int n_eps,
                             int threads = 1);

/// Draw M elemental-subset hypotheses from the table, resampling rejected
/// subsets (up to a fixed per-hypothesis budget). The stream is a pure
/// function of the seed and the table size.
std::vector<Hypothesis> sample_hypotheses(const CarrierTable& table, int count,
                                          std::uint64_t seed,
                                          RejectionCounters* counters = nullptr,
                                          int threads = 1);

/// Subset sampler restricted to the given candidate rows (refinement stage).
std::vector<Hypothesis> sample_hypotheses_from(const CarrierTable& table,
                                               std::span<const int> candidate_rows,
                                               int count, std::uint64_t seed,
                                               RejectionCounters* counters = nullptr,
                                               int threads = 1);

/// Number of initial-set points: epsilon percent of n, floored at five
/// elemental subsets.
int initial_set_size(const ModelSpec& spec, int n, double epsilon_percent);

}  // namespace misre
