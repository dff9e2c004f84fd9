#pragma once

#include "misre/types.hpp"

#include <optional>
#include <span>

namespace misre {

// ---------------------------------------------------------------------------
// Carrier lifting
// ---------------------------------------------------------------------------

/// Lift a measurement into its carrier vector(s) with Jacobians and
/// propagated covariances.
CarrierSet lift(const ModelSpec& spec, const InputPoint& point);

/// Carrier vectors only, without covariance propagation (generator and
/// test helpers).
Eigen::MatrixXd carriers_of(const ModelSpec& spec, const Eigen::VectorXd& y);

// ---------------------------------------------------------------------------
// Elemental subsets
// ---------------------------------------------------------------------------

enum class SolveFailure { RankDeficient, Constraint };

struct ElementalResult {
  std::optional<Hypothesis> hypothesis;
  SolveFailure failure = SolveFailure::RankDeficient;
};

/// Solve the linear relation exactly on one elemental subset. The carriers of
/// all channels are stacked row-wise into a (elemental_size * channel_count)
/// by carrier_dim matrix. Rank-deficient subsets and constraint violations
/// are rejected.
ElementalResult solve_elemental(const ModelSpec& spec,
                                const Eigen::MatrixXd& stacked_carriers);

/// Convenience overload lifting the subset points first.
ElementalResult solve_elemental(const ModelSpec& spec,
                                std::span<const InputPoint> subset);

/// Model-specific acceptance predicate: ellipse discriminant and axis-ratio
/// bound, cylinder quadric shape tests; other models always accept.
bool validate_constraints(const ModelSpec& spec, const Eigen::VectorXd& theta,
                          double alpha);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Translate every coordinate block to zero centroid and scale it so the mean
/// point norm equals sqrt(block dimension).
std::pair<std::vector<Eigen::VectorXd>, NormalizationTransform> normalize_points(
    const ModelSpec& spec, std::span<const Eigen::VectorXd> points);

/// Map a structure estimated in the normalized frame back to source
/// coordinates. Distances scale by the transform's distance_scale.
struct DenormalizedStructure {
  Eigen::VectorXd theta;
  double alpha;
  double sigma;
};
DenormalizedStructure denormalize_structure(const ModelSpec& spec,
                                            const Eigen::VectorXd& theta,
                                            double alpha, double sigma,
                                            const NormalizationTransform& tf);

// ---------------------------------------------------------------------------
// Geometric conversion
// ---------------------------------------------------------------------------

/// Convert a linear-space estimate to geometric parameters. The fundamental
/// matrix gets its rank-2 projection here, at export only.
GeometricParams to_geometric(const ModelSpec& spec, const Eigen::VectorXd& theta,
                             double alpha);

/// Signed algebraic residual x(y)^T theta - alpha, one row per channel.
Eigen::VectorXd algebraic_residuals(const ModelSpec& spec,
                                    const Eigen::VectorXd& theta, double alpha,
                                    const Eigen::VectorXd& y);

}  // namespace misre
