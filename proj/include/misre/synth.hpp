#pragma once

#include "misre/types.hpp"

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace misre {

struct LineSegment2d {
  Eigen::Vector2d from, to;
};

struct EllipseShape {
  Eigen::Vector2d center;
  double semi_major, semi_minor;
  double angle_rad = 0.0;
};

/// Rectangular patch origin + s*u + t*v with s, t uniform in [-1, 1].
struct PlanePatch {
  Eigen::Vector3d origin, u, v;
};

struct SphereShape {
  Eigen::Vector3d center;
  double radius;
};

struct CylinderShape {
  Eigen::Vector3d axis_point;
  Eigen::Vector3d axis_dir;
  double radius;
  double half_length;
};

using PlantedShape =
    std::variant<LineSegment2d, EllipseShape, PlanePatch, SphereShape, CylinderShape>;

struct PlantedModel {
  PlantedShape shape;
  int inliers = 0;
  double sigma_g = 0.0;  ///< perturbation std in source units
};

enum class NoiseMode {
  /// Along the locus normal for curves and surfaces, full-dimensional
  /// isotropic for lines and planes.
  Default,
  /// Full-dimensional isotropic for every shape.
  Ambient,
};

struct ScenarioSpec {
  Eigen::VectorXd region;  ///< box extents, origin at zero
  std::vector<PlantedModel> models;
  int outliers = 0;
  NoiseMode noise_mode = NoiseMode::Default;

  int dim() const { return static_cast<int>(region.size()); }
  int total_points() const;
};

struct LabeledDataset {
  std::vector<Eigen::VectorXd> points;
  std::vector<int> labels;  ///< planted model index, -1 for outliers
  ScenarioSpec spec;
};

/// Sample the scenario: exact locus points perturbed per the noise mode, plus
/// uniform outliers. Deterministic per seed.
LabeledDataset generate(const ScenarioSpec& spec, std::uint64_t seed);

/// Named scenario presets used by the command line and the benchmarks.
ScenarioSpec preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

/// Which estimation model fits a scenario's planted shapes.
ModelId scenario_model(const ScenarioSpec& spec);

/// Two-view correspondence set: one rigid motion per group, pixel noise on
/// every coordinate, plus uniformly mismatched pairs (label -1).
std::pair<std::vector<Eigen::VectorXd>, std::vector<int>> two_view_correspondences(
    std::span<const int> group_sizes, double sigma_px, int outliers,
    std::uint64_t seed);

}  // namespace misre
