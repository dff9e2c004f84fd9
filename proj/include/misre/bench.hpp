#pragma once

#include "misre/pipeline.hpp"
#include "misre/synth.hpp"
#include "misre/types.hpp"

// vendored single-header nlohmann/json
#include "json.hpp"

#include <optional>
#include <span>

namespace misre {

/// Does a recovered structure match a planted model: at least half of its
/// claimed points must carry the model's ground-truth label and the exported
/// geometry must sit within per-model parameter bounds (3 degrees of normal
/// error for lines and planes, 10 percent relative error on center and axes
/// for ellipses, on center and radius for spheres).
bool matches_planted(const Structure& structure, const PlantedModel& planted,
                     int planted_index, std::span<const int> labels);

struct RansacBaselineOptions {
  double threshold = 3.0;  ///< fixed inlier band, source units
};

struct ModelRecovery {
  int success_count = 0;  ///< repetitions in which the model was recovered
  double mean_scale = 0.0;
  double std_scale = 0.0;
  double mean_inliers = 0.0;
  double std_inliers = 0.0;
};

struct BenchReport {
  int repeats = 0;
  int all_recovered_count = 0;  ///< repetitions recovering every planted model
  std::vector<ModelRecovery> per_model;  ///< stats over all-recovered runs
  double mean_wall_s = 0.0;
  /// Among all-recovered repetitions: runs where some structure made mostly
  /// of outlier-labeled points outranks a ground-truth structure.
  int ordering_violations = 0;
  std::optional<std::vector<ModelRecovery>> baseline;  ///< plain RANSAC contrast
};

struct BenchOptions {
  ScenarioSpec scenario;
  int repeats = 100;
  EstimationConfig config;  ///< seed acts as the root for per-repetition seeds
  std::optional<RansacBaselineOptions> baseline;
  /// Workers across repetitions; each repetition runs single-threaded.
  int rep_threads = 0;
};

BenchReport run_bench(const BenchOptions& options);

nlohmann::json bench_to_json(const BenchReport& report,
                             const BenchOptions& options);

/// Sequential multi-structure RANSAC with a fixed inlier threshold, used only
/// as a benchmark contrast.
std::vector<Structure> ransac_baseline(std::span<const Eigen::VectorXd> points,
                                       const EstimationConfig& config,
                                       const RansacBaselineOptions& options);

}  // namespace misre
