#pragma once

#include "misre/types.hpp"

#include <span>

namespace misre {

/// Average inlier density of a structure in its linear space.
double strength(int inlier_count, double sigma_tls);

/// Scale below which a structure is reported as exact.
inline constexpr double kSigmaFloor = 1e-9;

/// Iterate extract-and-remove until too few points remain, then sort the
/// recovered structures by strength, strongest first.
EstimationResult run(std::span<const Eigen::VectorXd> points,
                     const EstimationConfig& config);

}  // namespace misre
