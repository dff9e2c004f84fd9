#include "misre/synth.hpp"

#include "misre/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>

namespace misre {

namespace {

void check_inside(const Eigen::VectorXd& region, const Eigen::VectorXd& lo,
                  const Eigen::VectorXd& hi, const char* what) {
  for (int i = 0; i < region.size(); ++i)
    if (lo(i) < 0.0 || hi(i) > region(i))
      throw InvalidInputError(std::string(what) +
                              " does not fit inside the scenario region");
}

void validate_shape(const Eigen::VectorXd& region, const PlantedModel& pm) {
  if (pm.inliers < 0 || pm.sigma_g < 0)
    throw InvalidInputError("negative inlier count or noise level");
  std::visit(
      [&](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, LineSegment2d>) {
          check_inside(region, shape.from.cwiseMin(shape.to),
                       shape.from.cwiseMax(shape.to), "line segment");
        } else if constexpr (std::is_same_v<T, EllipseShape>) {
          const double c = std::cos(shape.angle_rad), s = std::sin(shape.angle_rad);
          Eigen::Vector2d half(
              std::hypot(shape.semi_major * c, shape.semi_minor * s),
              std::hypot(shape.semi_major * s, shape.semi_minor * c));
          check_inside(region, shape.center - half, shape.center + half, "ellipse");
        } else if constexpr (std::is_same_v<T, PlanePatch>) {
          const Eigen::Vector3d half = shape.u.cwiseAbs() + shape.v.cwiseAbs();
          check_inside(region, shape.origin - half, shape.origin + half,
                       "plane patch");
        } else if constexpr (std::is_same_v<T, SphereShape>) {
          const Eigen::Vector3d half = Eigen::Vector3d::Constant(shape.radius);
          check_inside(region, shape.center - half, shape.center + half, "sphere");
        } else if constexpr (std::is_same_v<T, CylinderShape>) {
          const Eigen::Vector3d u = shape.axis_dir.normalized();
          Eigen::Vector3d half;
          for (int i = 0; i < 3; ++i)
            half(i) = shape.half_length * std::abs(u(i)) +
                      shape.radius * std::sqrt(std::max(0.0, 1.0 - u(i) * u(i)));
          check_inside(region, shape.axis_point - half, shape.axis_point + half,
                       "cylinder");
        }
      },
      pm.shape);
}

int shape_dim(const PlantedShape& shape) {
  return std::holds_alternative<LineSegment2d>(shape) ||
                 std::holds_alternative<EllipseShape>(shape)
             ? 2
             : 3;
}

Eigen::VectorXd sample_inlier(const PlantedShape& shape, double sigma,
                              NoiseMode mode, Rng& rng) {
  Eigen::VectorXd p;
  if (const auto* line = std::get_if<LineSegment2d>(&shape)) {
    const double t = rng.uniform();
    Eigen::Vector2d q = line->from + t * (line->to - line->from);
    q.x() += sigma * rng.normal();
    q.y() += sigma * rng.normal();
    p = q;
  } else if (const auto* el = std::get_if<EllipseShape>(&shape)) {
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double c = std::cos(el->angle_rad), s = std::sin(el->angle_rad);
    Eigen::Matrix2d rot;
    rot << c, -s, s, c;
    Eigen::Vector2d local(el->semi_major * std::cos(phi),
                          el->semi_minor * std::sin(phi));
    Eigen::Vector2d q = el->center + rot * local;
    if (mode == NoiseMode::Ambient) {
      q.x() += sigma * rng.normal();
      q.y() += sigma * rng.normal();
    } else {
      Eigen::Vector2d normal_local(el->semi_minor * std::cos(phi),
                                   el->semi_major * std::sin(phi));
      normal_local.normalize();
      q += sigma * rng.normal() * (rot * normal_local);
    }
    p = q;
  } else if (const auto* plane = std::get_if<PlanePatch>(&shape)) {
    Eigen::Vector3d q = plane->origin + rng.uniform(-1.0, 1.0) * plane->u +
                        rng.uniform(-1.0, 1.0) * plane->v;
    q.x() += sigma * rng.normal();
    q.y() += sigma * rng.normal();
    q.z() += sigma * rng.normal();
    p = q;
  } else if (const auto* sphere = std::get_if<SphereShape>(&shape)) {
    Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
    while (dir.norm() < 1e-12) dir = {rng.normal(), rng.normal(), rng.normal()};
    dir.normalize();
    Eigen::Vector3d q = sphere->center + sphere->radius * dir;
    if (mode == NoiseMode::Ambient) {
      q += sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    } else {
      q += sigma * rng.normal() * dir;
    }
    p = q;
  } else {
    const auto& cyl = std::get<CylinderShape>(shape);
    const Eigen::Vector3d u = cyl.axis_dir.normalized();
    Eigen::Vector3d v = u.unitOrthogonal();
    Eigen::Vector3d w = u.cross(v);
    const double t = rng.uniform(-cyl.half_length, cyl.half_length);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const Eigen::Vector3d radial = std::cos(phi) * v + std::sin(phi) * w;
    Eigen::Vector3d q = cyl.axis_point + t * u + cyl.radius * radial;
    if (mode == NoiseMode::Ambient) {
      q += sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    } else {
      q += sigma * rng.normal() * radial;
    }
    p = q;
  }
  return p;
}

}  // namespace

int ScenarioSpec::total_points() const {
  int total = outliers;
  for (const auto& m : models) total += m.inliers;
  return total;
}

ModelId scenario_model(const ScenarioSpec& spec) {
  if (spec.models.empty()) return spec.dim() == 2 ? ModelId::Line2d : ModelId::Plane3d;
  const PlantedShape& s = spec.models.front().shape;
  if (std::holds_alternative<LineSegment2d>(s)) return ModelId::Line2d;
  if (std::holds_alternative<EllipseShape>(s)) return ModelId::Ellipse2d;
  if (std::holds_alternative<PlanePatch>(s)) return ModelId::Plane3d;
  if (std::holds_alternative<SphereShape>(s)) return ModelId::Sphere3d;
  return ModelId::Cylinder3d;
}

LabeledDataset generate(const ScenarioSpec& spec, std::uint64_t seed) {
  const int dim = spec.dim();
  if (dim != 2 && dim != 3)
    throw InvalidInputError("scenario region must be 2- or 3-dimensional");
  if (spec.outliers < 0) throw InvalidInputError("negative outlier count");
  for (const auto& m : spec.models) {
    if (shape_dim(m.shape) != dim)
      throw InvalidInputError("planted shape dimension does not match region");
    validate_shape(spec.region, m);
  }

  LabeledDataset out;
  out.spec = spec;
  out.points.reserve(spec.total_points());
  out.labels.reserve(spec.total_points());

  Rng rng(substream(seed, {0x9e37ULL}));
  for (size_t k = 0; k < spec.models.size(); ++k) {
    const auto& m = spec.models[k];
    for (int i = 0; i < m.inliers; ++i) {
      out.points.push_back(sample_inlier(m.shape, m.sigma_g, spec.noise_mode, rng));
      out.labels.push_back(static_cast<int>(k));
    }
  }
  for (int i = 0; i < spec.outliers; ++i) {
    Eigen::VectorXd p(dim);
    for (int d = 0; d < dim; ++d) p(d) = rng.uniform(0.0, spec.region(d));
    out.points.push_back(std::move(p));
    out.labels.push_back(-1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

ScenarioSpec five_lines() {
  ScenarioSpec s;
  s.region = Eigen::Vector2d(700, 700);
  s.models = {
      {LineSegment2d{{10, 150}, {690, 430}}, 300, 3},
      {LineSegment2d{{120, 10}, {460, 690}}, 250, 6},
      {LineSegment2d{{10, 600}, {690, 220}}, 200, 9},
      {LineSegment2d{{200, 690}, {620, 10}}, 150, 12},
      {LineSegment2d{{300, 690}, {690, 560}}, 100, 15},
  };
  s.outliers = 350;
  return s;
}

ScenarioSpec three_ellipses() {
  ScenarioSpec s;
  s.region = Eigen::Vector2d(700, 700);
  s.models = {
      {EllipseShape{{400, 200}, 230, 130, 10 * M_PI / 180}, 300, 3},
      {EllipseShape{{190, 470}, 150, 95, -25 * M_PI / 180}, 250, 6},
      {EllipseShape{{540, 520}, 95, 60, 40 * M_PI / 180}, 200, 9},
  };
  s.outliers = 350;
  return s;
}

ScenarioSpec two_ellipses_fig3() {
  ScenarioSpec s;
  s.region = Eigen::Vector2d(700, 700);
  s.models = {
      {EllipseShape{{250, 270}, 190, 115, 15 * M_PI / 180}, 200, 5},
      {EllipseShape{{460, 440}, 170, 105, -30 * M_PI / 180}, 200, 10},
  };
  s.outliers = 200;
  return s;
}

ScenarioSpec circle_limit(double radius) {
  ScenarioSpec s;
  s.region = Eigen::Vector2d(700, 700);
  s.models = {{EllipseShape{{350, 350}, radius, radius, 0.0}, 200, 10}};
  s.outliers = 1500;
  return s;
}

ScenarioSpec single_line(double sigma) {
  ScenarioSpec s;
  s.region = Eigen::Vector2d(700, 700);
  s.models = {{LineSegment2d{{30, 100}, {680, 560}}, 300, sigma}};
  s.outliers = 350;
  return s;
}

}  // namespace

ScenarioSpec preset_scenario(const std::string& name) {
  if (name == "five-lines") return five_lines();
  if (name == "three-ellipses") return three_ellipses();
  if (name == "two-ellipses-fig3") return two_ellipses_fig3();
  if (name == "circle-limit-fig5") return circle_limit(50);
  if (name == "circle-limit-fig5-large") return circle_limit(200);
  if (name == "single-line-sigma3") return single_line(3);
  if (name == "single-line-sigma6") return single_line(6);
  if (name == "single-line-sigma9") return single_line(9);
  throw InvalidInputError("unknown scenario preset: " + name);
}

std::vector<std::string> preset_names() {
  return {"five-lines",
          "three-ellipses",
          "two-ellipses-fig3",
          "circle-limit-fig5",
          "circle-limit-fig5-large",
          "single-line-sigma3",
          "single-line-sigma6",
          "single-line-sigma9"};
}

// ---------------------------------------------------------------------------
// Two-view correspondences
// ---------------------------------------------------------------------------

std::pair<std::vector<Eigen::VectorXd>, std::vector<int>> two_view_correspondences(
    std::span<const int> group_sizes, double sigma_px, int outliers,
    std::uint64_t seed) {
  const double fx = 600.0, cx = 320.0, cy = 240.0;
  const double width = 640.0, height = 480.0;
  Rng rng(substream(seed, {0x2b1eULL}));

  std::vector<Eigen::VectorXd> points;
  std::vector<int> labels;

  auto project = [&](const Eigen::Vector3d& X) {
    return Eigen::Vector2d(fx * X.x() / X.z() + cx, fx * X.y() / X.z() + cy);
  };

  for (size_t g = 0; g < group_sizes.size(); ++g) {
    // one rigid motion per group with enough rotation to avoid degeneracy
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const double angle = rng.uniform(0.12, 0.3);
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    Eigen::Vector3d trans(rng.uniform(-0.8, 0.8), rng.uniform(-0.5, 0.5),
                          rng.uniform(-0.3, 0.3));
    if (trans.norm() < 0.3) trans += Eigen::Vector3d(0.5, 0.2, 0.0);

    int produced = 0;
    while (produced < group_sizes[g]) {
      Eigen::Vector3d X(rng.uniform(-1.6, 1.6), rng.uniform(-1.2, 1.2),
                        rng.uniform(3.0, 7.0));
      const Eigen::Vector3d X2 = rot * X + trans;
      if (X2.z() < 0.5) continue;
      Eigen::Vector2d p1 = project(X);
      Eigen::Vector2d p2 = project(X2);
      if (p1.x() < 0 || p1.x() > width || p1.y() < 0 || p1.y() > height) continue;
      if (p2.x() < 0 || p2.x() > width || p2.y() < 0 || p2.y() > height) continue;
      Eigen::VectorXd row(4);
      row << p1.x() + sigma_px * rng.normal(), p1.y() + sigma_px * rng.normal(),
          p2.x() + sigma_px * rng.normal(), p2.y() + sigma_px * rng.normal();
      points.push_back(std::move(row));
      labels.push_back(static_cast<int>(g));
      ++produced;
    }
  }
  for (int i = 0; i < outliers; ++i) {
    Eigen::VectorXd row(4);
    row << rng.uniform(0, width), rng.uniform(0, height), rng.uniform(0, width),
        rng.uniform(0, height);
    points.push_back(std::move(row));
    labels.push_back(-1);
  }
  return {std::move(points), std::move(labels)};
}

}  // namespace misre
