#pragma once

#include "misre/synth.hpp"
#include "misre/types.hpp"

// vendored single-header nlohmann/json
#include "json.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace misre {

inline constexpr int kResultSchemaVersion = 1;

/// CSV rows of fixed width ("x,y", "x,y,z" or "x,y,x2,y2"); ascii PLY is
/// accepted for 3D point clouds.
std::vector<Eigen::VectorXd> read_points(const std::filesystem::path& path,
                                         int dimensionality);
std::vector<Eigen::VectorXd> read_correspondences(const std::filesystem::path& path);

void write_points_csv(const std::filesystem::path& path,
                      std::span<const Eigen::VectorXd> points);
void write_points_ply(const std::filesystem::path& path,
                      std::span<const Eigen::VectorXd> points);
void write_labels_csv(const std::filesystem::path& path,
                      std::span<const int> labels);
std::vector<int> read_labels_csv(const std::filesystem::path& path);

/// Versioned result document: per structure its rank, strength, scale,
/// inlier count, linear-space estimate, geometric parameters and inlier
/// indices, plus the residual set and per-iteration diagnostics.
nlohmann::json result_to_json(const EstimationResult& result,
                              const EstimationConfig& config);
void write_result(const std::filesystem::path& path,
                  const EstimationResult& result,
                  const EstimationConfig& config);

/// Point scatter with structures colored by rank; 2D scenes render directly,
/// 3D scenes as three axis-aligned orthographic projections.
void render_svg(const std::filesystem::path& path,
                std::span<const Eigen::VectorXd> points,
                const EstimationResult& result);

nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);
ScenarioSpec read_scenario(const std::filesystem::path& path);

}  // namespace misre
