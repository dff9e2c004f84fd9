#pragma once

#include "misre/types.hpp"

#include <span>
#include <vector>

namespace misre {

/// Number of points per segment of width delta over an ascending distance
/// sequence: n_k counts distances in ((k-1)*delta, k*delta], zeros fall into
/// the first segment. Covers the data up to a segment cap.
std::vector<std::int64_t> segment_counts(std::span<const double> sorted,
                                         double delta);

/// Expansion stop index: the smallest k whose next segment holds at most half
/// the average population of the first k segments. If the condition never
/// fires within the segment cap, the structure is taken to reach the data's
/// edge and the cap is returned.
int expand(std::span<const double> sorted, double delta);

/// Run the expansion criterion over widths taken at increasing percentile
/// positions and return the farthest expansion inside the region of interest.
ScaleEstimate estimate_scale(std::span<const double> sorted,
                             double epsilon_percent);

}  // namespace misre
