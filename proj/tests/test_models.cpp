#include "misre/engine.hpp"
#include "misre/models.hpp"
#include "misre/rng.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <cmath>

using namespace misre;
using namespace misre::testing;

namespace {

const ModelId kAllModels[] = {ModelId::Line2d,     ModelId::Plane3d,
                              ModelId::Ellipse2d,  ModelId::Sphere3d,
                              ModelId::Cylinder3d, ModelId::Fundamental,
                              ModelId::Homography};

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("model catalogue dimensions") {
  struct Row {
    ModelId id;
    int l, m, zeta, m_e;
  };
  const Row rows[] = {
      {ModelId::Line2d, 2, 2, 1, 2},      {ModelId::Plane3d, 3, 3, 1, 3},
      {ModelId::Ellipse2d, 2, 5, 1, 5},   {ModelId::Sphere3d, 3, 4, 1, 4},
      {ModelId::Cylinder3d, 3, 9, 1, 9},  {ModelId::Fundamental, 4, 8, 1, 8},
      {ModelId::Homography, 4, 9, 2, 4},
  };
  for (const Row& r : rows) {
    const ModelSpec& spec = spec_for(r.id);
    CHECK(spec.input_dim == r.l);
    CHECK(spec.carrier_dim == r.m);
    CHECK(spec.channel_count == r.zeta);
    CHECK(spec.elemental_size == r.m_e);
    CHECK(model_from_string(to_string(r.id)) == r.id);
  }
  CHECK_THROWS_AS(model_from_string("circle9d"), InvalidInputError);
}

TEST_CASE("lift: linear models copy the input") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  const CarrierSet set = lift(spec, InputPoint(vec({3, 4})));
  CHECK(set.channels.size() == 1);
  CHECK(set.channels[0].x.isApprox(vec({3, 4})));
  CHECK(set.channels[0].jac.isIdentity(0.0));
  CHECK(set.channels[0].cov.isIdentity(0.0));
}

TEST_CASE("lift: ellipse carriers and Jacobian at (1,2)") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  const CarrierSet set = lift(spec, InputPoint(vec({1, 2})));
  CHECK(set.channels[0].x.isApprox(vec({1, 2, 1, 2, 4})));
  Eigen::MatrixXd jt(2, 5);
  jt << 1, 0, 2, 2, 0,
        0, 1, 0, 1, 4;
  CHECK(set.channels[0].jac.transpose().isApprox(jt));
}

TEST_CASE("lift: sphere carrier at (1,2,2)") {
  const ModelSpec& spec = spec_for(ModelId::Sphere3d);
  const CarrierSet set = lift(spec, InputPoint(vec({1, 2, 2})));
  CHECK(set.channels[0].x.isApprox(vec({9, 1, 2, 2})));
}

TEST_CASE("lift: fundamental carriers and Jacobian") {
  const ModelSpec& spec = spec_for(ModelId::Fundamental);
  const double x = 1.5, y = -2.0, xp = 0.5, yp = 3.0;
  const CarrierSet set = lift(spec, InputPoint(vec({x, y, xp, yp})));
  CHECK(set.channels[0].x.isApprox(
      vec({x, y, xp, yp, x * xp, x * yp, y * xp, y * yp})));
  Eigen::MatrixXd jt(4, 8);
  jt << 1, 0, 0, 0, xp, yp, 0, 0,
        0, 1, 0, 0, 0, 0, xp, yp,
        0, 0, 1, 0, x, 0, y, 0,
        0, 0, 0, 1, 0, x, 0, y;
  CHECK(set.channels[0].jac.transpose().isApprox(jt));
}

TEST_CASE("lift: homography has two channels with homogeneous carriers") {
  const ModelSpec& spec = spec_for(ModelId::Homography);
  const CarrierSet set = lift(spec, InputPoint(vec({1, 2, 3, 4})));
  CHECK(set.channels.size() == 2);
  CHECK(set.channels[0].x.isApprox(vec({-1, -2, -1, 0, 0, 0, 3, 6, 3})));
  CHECK(set.channels[1].x.isApprox(vec({0, 0, 0, -1, -2, -1, 4, 8, 4})));
}

TEST_CASE("lift rejects dimension mismatch") {
  CHECK_THROWS_AS(lift(spec_for(ModelId::Plane3d), InputPoint(vec({1, 2}))),
                  InvalidInputError);
}

TEST_CASE("Jacobians match central finite differences") {
  Rng rng(41);
  for (ModelId id : kAllModels) {
    const ModelSpec& spec = spec_for(id);
    if (spec.identity_jacobian) continue;
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd y(spec.input_dim);
      for (int k = 0; k < spec.input_dim; ++k) y(k) = rng.uniform(-2.0, 2.0);
      const CarrierSet set = lift(spec, InputPoint(y));
      for (int c = 0; c < spec.channel_count; ++c) {
        for (int k = 0; k < spec.input_dim; ++k) {
          Eigen::VectorXd yp = y, ym = y;
          yp(k) += h;
          ym(k) -= h;
          const Eigen::VectorXd col =
              (carriers_of(spec, yp).row(c) - carriers_of(spec, ym).row(c))
                  .transpose() /
              (2 * h);
          const double scale = std::max(1.0, col.norm());
          CHECK((set.channels[c].jac.col(k) - col).norm() / scale <= 1e-5);
        }
      }
    }
  }
}

TEST_CASE("solve_elemental: horizontal line through two points") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  std::vector<InputPoint> pts = {InputPoint(vec({0, 0})), InputPoint(vec({1, 0}))};
  const ElementalResult res = solve_elemental(spec, pts);
  REQUIRE(res.hypothesis.has_value());
  CHECK(std::abs(res.hypothesis->theta(1)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.hypothesis->alpha == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("solve_elemental: unit sphere from four points") {
  const ModelSpec& spec = spec_for(ModelId::Sphere3d);
  std::vector<InputPoint> pts = {
      InputPoint(vec({1, 0, 0})), InputPoint(vec({0, 1, 0})),
      InputPoint(vec({0, 0, 1})), InputPoint(vec({-1, 0, 0}))};
  const ElementalResult res = solve_elemental(spec, pts);
  REQUIRE(res.hypothesis.has_value());
  const auto geo = to_geometric(spec, res.hypothesis->theta, res.hypothesis->alpha);
  const auto& sphere = std::get<SphereParams>(geo);
  CHECK(sphere.center.norm() <= 1e-9);
  CHECK(sphere.radius == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("solve_elemental: exact ellipse from five points") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  std::vector<InputPoint> pts;
  for (double phi : {0.3, 1.1, 2.0, 3.5, 5.0})
    pts.emplace_back(vec({2 * std::cos(phi), std::sin(phi)}));
  const ElementalResult res = solve_elemental(spec, pts);
  REQUIRE(res.hypothesis.has_value());
  const auto geo = to_geometric(spec, res.hypothesis->theta, res.hypothesis->alpha);
  const auto& el = std::get<EllipseParams>(geo);
  CHECK(el.center.norm() <= 1e-6);
  CHECK(el.semi_major == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(el.semi_minor == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solve_elemental rejects degenerate subsets") {
  {
    const ModelSpec& spec = spec_for(ModelId::Line2d);
    std::vector<InputPoint> pts = {InputPoint(vec({1, 1})), InputPoint(vec({1, 1}))};
    CHECK_FALSE(solve_elemental(spec, pts).hypothesis.has_value());
  }
  {
    const ModelSpec& spec = spec_for(ModelId::Plane3d);
    std::vector<InputPoint> pts = {InputPoint(vec({0, 0, 0})),
                                   InputPoint(vec({1, 1, 1})),
                                   InputPoint(vec({2, 2, 2}))};
    const ElementalResult res = solve_elemental(spec, pts);
    CHECK_FALSE(res.hypothesis.has_value());
    CHECK(res.failure == SolveFailure::RankDeficient);
  }
}

TEST_CASE("solve_elemental: homography from four exact pairs") {
  const ModelSpec& spec = spec_for(ModelId::Homography);
  Eigen::Matrix3d h;
  h << 1.1, 0.02, 0.3, -0.01, 0.95, -0.2, 1e-4, -2e-4, 1.0;
  std::vector<InputPoint> pts;
  const double xs[] = {0.1, 1.4, -0.9, 0.8}, ys[] = {0.2, -1.0, 1.2, 0.9};
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d q = h * Eigen::Vector3d(xs[i], ys[i], 1.0);
    pts.emplace_back(vec({xs[i], ys[i], q.x() / q.z(), q.y() / q.z()}));
  }
  const ElementalResult res = solve_elemental(spec, pts);
  REQUIRE(res.hypothesis.has_value());
  CHECK(res.hypothesis->alpha == 0.0);
  // residuals vanish on the subset, both channels
  for (const auto& p : pts) {
    const Eigen::VectorXd r =
        algebraic_residuals(spec, res.hypothesis->theta, 0.0, p.y);
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-8);
  }
  const auto geo = to_geometric(spec, res.hypothesis->theta, res.hypothesis->alpha);
  Eigen::Matrix3d rec = std::get<MatrixParams>(geo).matrix;
  rec *= h.norm() / rec.norm();
  if (rec(2, 2) * h(2, 2) < 0) rec = -rec;
  CHECK((rec - h).norm() <= 1e-6 * h.norm());
}

TEST_CASE("elemental solutions are exact on their own subset") {
  Rng rng(99);
  for (ModelId id : kAllModels) {
    const ModelSpec& spec = spec_for(id);
    int accepted = 0;
    for (int trial = 0; trial < 40 && accepted < 10; ++trial) {
      std::vector<InputPoint> pts;
      for (int i = 0; i < spec.elemental_size; ++i) {
        Eigen::VectorXd y(spec.input_dim);
        for (int k = 0; k < spec.input_dim; ++k) y(k) = rng.uniform(-1.5, 1.5);
        pts.emplace_back(std::move(y));
      }
      const ElementalResult res = solve_elemental(spec, pts);
      if (!res.hypothesis) continue;  // constraint models reject generic data
      ++accepted;
      for (const auto& p : pts) {
        const Eigen::VectorXd r = algebraic_residuals(
            spec, res.hypothesis->theta, res.hypothesis->alpha, p.y);
        CHECK(r.cwiseAbs().maxCoeff() <= 1e-8);
      }
      CHECK(res.hypothesis->theta.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    if (id != ModelId::Cylinder3d) CHECK(accepted >= 10);
  }
}

TEST_CASE("validate_constraints: ellipse discriminant and axis ratio") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  // circle x^2 + y^2 = 1
  Eigen::VectorXd circle = vec({0, 0, 1, 0, 1}).normalized();
  CHECK(validate_constraints(spec, circle, 1.0 / std::sqrt(2.0)));
  // hyperbola branch
  Eigen::VectorXd hyper = vec({0, 0, 1, 0, -0.1}).normalized();
  CHECK_FALSE(validate_constraints(spec, hyper, 0.5));
  // axis ratio 9 accepted, 11 rejected
  auto ratio_theta = [](double ratio) {
    Eigen::VectorXd t = vec({0, 0, 1.0 / (ratio * ratio), 0, 1.0});
    return t.normalized();
  };
  CHECK(validate_constraints(spec, ratio_theta(9.0), 0.01));
  CHECK_FALSE(validate_constraints(spec, ratio_theta(11.0), 0.01));
}

TEST_CASE("validate_constraints: cylinder quadric shape test") {
  const ModelSpec& spec = spec_for(ModelId::Cylinder3d);
  // nine exact points on a tilted cylinder
  const Eigen::Vector3d axis_point(0.3, -0.2, 0.1);
  const Eigen::Vector3d axis_dir = Eigen::Vector3d(0.2, 0.3, 1.0).normalized();
  std::vector<InputPoint> pts;
  Rng rng(7);
  for (int i = 0; i < 9; ++i)
    pts.emplace_back(cylinder_point(axis_point, axis_dir, 0.8,
                                    rng.uniform(-1.2, 1.2),
                                    rng.uniform(0, 2 * M_PI)));
  const ElementalResult res = solve_elemental(spec, pts);
  REQUIRE(res.hypothesis.has_value());

  // the quadratic-term matrix has two equal singular values and a null one
  Eigen::Matrix3d d_mat;
  const Eigen::VectorXd& t = res.hypothesis->theta;
  d_mat << t(0), t(1) / 2, t(2) / 2, t(1) / 2, t(3), t(4) / 2, t(2) / 2,
      t(4) / 2, t(5);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(d_mat);
  Eigen::Vector3d sv = es.eigenvalues().cwiseAbs();
  std::sort(sv.data(), sv.data() + 3, std::greater<double>());
  CHECK(sv(0) / sv(1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(sv(2) / sv(0) <= 0.05);

  const auto geo = to_geometric(spec, res.hypothesis->theta, res.hypothesis->alpha);
  const auto& cyl = std::get<CylinderParams>(geo);
  CHECK(cyl.radius == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(std::abs(cyl.axis_dir.dot(axis_dir)) == doctest::Approx(1.0).epsilon(1e-8));

  // a sphere is not a cylinder: quadratic part proportional to the identity
  Eigen::VectorXd sphere_theta = vec({1, 0, 0, 1, 0, 1, -0.4, 0.2, 0.1}).normalized();
  CHECK_FALSE(validate_constraints(spec, sphere_theta, 0.3));
}

TEST_CASE("normalize_points: two-point block") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  std::vector<Eigen::VectorXd> pts = {vec({0, 0}), vec({2, 0})};
  auto [norm, tf] = normalize_points(spec, pts);
  CHECK(norm[0].isApprox(vec({-std::sqrt(2.0), 0}), 1e-12));
  CHECK(norm[1].isApprox(vec({std::sqrt(2.0), 0}), 1e-12));
  CHECK(tf.blocks[0].translation.isApprox(vec({1, 0}), 1e-12));
}

TEST_CASE("normalize_points: already-normalized cloud is a fixed point") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  std::vector<Eigen::VectorXd> pts = {vec({1, 1}), vec({-1, 1}), vec({1, -1}),
                                      vec({-1, -1})};
  auto [norm, tf] = normalize_points(spec, pts);
  CHECK(tf.blocks[0].scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tf.blocks[0].translation.norm() <= 1e-12);
  CHECK(norm[0].isApprox(pts[0], 1e-12));
}

TEST_CASE("normalize_points: mean norm reaches sqrt(dim)") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  Rng rng(5);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 100; ++i)
    pts.push_back(vec({rng.uniform(0, 700), rng.uniform(0, 700)}));
  auto [norm, tf] = normalize_points(spec, pts);
  double mean = 0, centroid_norm = 0;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : norm) c += p.head<2>();
  centroid_norm = (c / 100).norm();
  for (const auto& p : norm) mean += p.norm();
  mean /= 100;
  CHECK(mean == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(centroid_norm <= 1e-9);

  // round trip
  for (int i = 0; i < 100; ++i)
    CHECK((tf.invert(spec, norm[i]) - pts[i]).norm() <=
          1e-10 * std::max(1.0, pts[i].norm()));
}

TEST_CASE("normalize_points: coincident points degenerate") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  std::vector<Eigen::VectorXd> pts = {vec({3, 4}), vec({3, 4}), vec({3, 4})};
  CHECK_THROWS_AS(normalize_points(spec, pts), DegenerateInputError);
}

TEST_CASE("two-view models normalize each image block separately") {
  const ModelSpec& spec = spec_for(ModelId::Fundamental);
  std::vector<Eigen::VectorXd> pts = exact_two_view(50, 3);
  auto [norm, tf] = normalize_points(spec, pts);
  CHECK(tf.blocks.size() == 2);
  double m1 = 0, m2 = 0;
  for (const auto& p : norm) {
    m1 += p.head<2>().norm();
    m2 += p.tail<2>().norm();
  }
  CHECK(m1 / 50 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(m2 / 50 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("denormalize_structure: identity transform") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  NormalizationTransform tf;
  tf.blocks = {{vec({0, 0}), 1.0}};
  tf.distance_scale = 1.0;
  Eigen::VectorXd theta = vec({0.1, -0.2, 1, 0.05, 0.8}).normalized();
  const auto den = denormalize_structure(spec, theta, 0.4, 2.5, tf);
  CHECK(den.theta.isApprox(theta, 1e-12));
  CHECK(den.alpha == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(den.sigma == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("denormalize_structure: line under pure translation shifts alpha") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  NormalizationTransform tf;
  tf.blocks = {{vec({3, -2}), 1.0}};  // normalized frame is y - t
  tf.distance_scale = 1.0;
  Eigen::VectorXd theta = vec({0.6, 0.8});
  const auto den = denormalize_structure(spec, theta, 1.5, 1.0, tf);
  CHECK(den.theta.isApprox(theta, 1e-12));
  CHECK(den.alpha == doctest::Approx(1.5 + theta.dot(vec({3, -2}))).epsilon(1e-12));
}

TEST_CASE("denormalize_structure: locus maps through the inverse transform") {
  // fit in a synthetic normalized frame, denormalize, and check the mapped
  // locus satisfies the denormalized relation
  Rng rng(11);
  for (ModelId id : {ModelId::Ellipse2d, ModelId::Sphere3d, ModelId::Cylinder3d,
                     ModelId::Fundamental, ModelId::Homography}) {
    const ModelSpec& spec = spec_for(id);
    NormalizationTransform tf;
    tf.blocks.resize(spec.block_count);
    double log_sum = 0;
    for (int b = 0; b < spec.block_count; ++b) {
      Eigen::VectorXd t(spec.blocks[b].dim);
      for (int k = 0; k < t.size(); ++k) t(k) = rng.uniform(-5, 5);
      tf.blocks[b] = {t, rng.uniform(0.5, 2.0)};
      log_sum += spec.blocks[b].dim * std::log(tf.blocks[b].scale);
    }
    tf.distance_scale = std::exp(log_sum / spec.input_dim);

    // an exact structure in the normalized frame from an elemental subset
    std::vector<InputPoint> subset;
    ElementalResult res;
    do {
      subset.clear();
      for (int i = 0; i < spec.elemental_size; ++i) {
        Eigen::VectorXd y(spec.input_dim);
        for (int k = 0; k < spec.input_dim; ++k) y(k) = rng.uniform(-1.2, 1.2);
        subset.emplace_back(std::move(y));
      }
      res = solve_elemental(spec, subset);
    } while (!res.hypothesis);

    const auto den = denormalize_structure(spec, res.hypothesis->theta,
                                           res.hypothesis->alpha, 1.0, tf);
    for (const auto& p : subset) {
      const Eigen::VectorXd orig = tf.invert(spec, p.y);
      const Eigen::VectorXd r =
          algebraic_residuals(spec, den.theta, den.alpha, orig);
      CHECK(r.cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("denormalize_structure: ellipse axes scale with the frame") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  NormalizationTransform tf;
  const double s = 0.25;
  tf.blocks = {{vec({0, 0}), s}};
  tf.distance_scale = s;
  // unit circle in the normalized frame
  Eigen::VectorXd theta = vec({0, 0, 1, 0, 1}).normalized();
  const double alpha = 1.0 / std::sqrt(2.0);
  const auto den = denormalize_structure(spec, theta, alpha, 0.1, tf);
  const auto geo = to_geometric(spec, den.theta, den.alpha);
  const auto& el = std::get<EllipseParams>(geo);
  CHECK(el.semi_major == doctest::Approx(1.0 / s).epsilon(1e-9));
  CHECK(el.semi_minor == doctest::Approx(1.0 / s).epsilon(1e-9));
  CHECK(den.sigma == doctest::Approx(0.1 / s).epsilon(1e-12));
}

TEST_CASE("fundamental matrix export is rank-2 and respects held-out pairs") {
  const ModelSpec& spec = spec_for(ModelId::Fundamental);
  const std::vector<Eigen::VectorXd> corr = exact_two_view(40, 17);
  auto [norm, tf] = normalize_points(spec, corr);
  std::vector<InputPoint> subset;
  for (int i = 0; i < 8; ++i) subset.emplace_back(norm[i]);
  const ElementalResult res = solve_elemental(spec, subset);
  REQUIRE(res.hypothesis.has_value());
  const auto den = denormalize_structure(spec, res.hypothesis->theta,
                                         res.hypothesis->alpha, 1.0, tf);
  const auto geo = to_geometric(spec, den.theta, den.alpha);
  const Eigen::Matrix3d f = std::get<MatrixParams>(geo).matrix;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(f);
  CHECK(svd.singularValues()(2) <= 1e-10 * svd.singularValues()(0));
  for (size_t i = 8; i < corr.size(); ++i) {
    const Eigen::Vector3d x1(corr[i](0), corr[i](1), 1.0);
    const Eigen::Vector3d x2(corr[i](2), corr[i](3), 1.0);
    CHECK(std::abs(x2.dot(f * x1)) <= 1e-6);
  }
}

TEST_CASE("distance is invariant to negating the representation") {
  Rng rng(23);
  for (ModelId id : kAllModels) {
    const ModelSpec& spec = spec_for(id);
    Eigen::VectorXd theta(spec.carrier_dim);
    for (int k = 0; k < theta.size(); ++k) theta(k) = rng.normal();
    theta.normalize();
    const double alpha = rng.uniform(-1, 1);
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd y(spec.input_dim);
      for (int k = 0; k < spec.input_dim; ++k) y(k) = rng.uniform(-2, 2);
      const CarrierSet set = lift(spec, InputPoint(y));
      Hypothesis pos, neg;
      pos.theta = theta;
      pos.alpha = alpha;
      neg.theta = -theta;
      neg.alpha = -alpha;
      const double d1 = mahalanobis(set, pos).distance;
      const double d2 = mahalanobis(set, neg).distance;
      CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
    }
  }
}

TEST_CASE("translation invariance of ellipse and sphere distances") {
  Rng rng(31);
  for (ModelId id : {ModelId::Ellipse2d, ModelId::Sphere3d}) {
    const ModelSpec& spec = spec_for(id);
    // a valid structure from an elemental subset near the origin
    std::vector<InputPoint> subset;
    ElementalResult res;
    do {
      subset.clear();
      for (int i = 0; i < spec.elemental_size; ++i) {
        Eigen::VectorXd y(spec.input_dim);
        for (int k = 0; k < spec.input_dim; ++k) y(k) = rng.uniform(-1.5, 1.5);
        subset.emplace_back(std::move(y));
      }
      res = solve_elemental(spec, subset);
    } while (!res.hypothesis);

    Eigen::VectorXd t(spec.input_dim);
    for (int k = 0; k < spec.input_dim; ++k) t(k) = rng.uniform(-4, 4);
    NormalizationTransform tf;  // normalized frame: y + t
    tf.blocks = {{-t, 1.0}};
    tf.distance_scale = 1.0;
    const auto moved = denormalize_structure(spec, res.hypothesis->theta,
                                             res.hypothesis->alpha, 1.0, tf);

    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd y(spec.input_dim);
      for (int k = 0; k < spec.input_dim; ++k) y(k) = rng.uniform(-2, 2);
      Hypothesis base, shifted;
      base.theta = res.hypothesis->theta;
      base.alpha = res.hypothesis->alpha;
      shifted.theta = moved.theta;
      shifted.alpha = moved.alpha;
      const double d1 = mahalanobis(lift(spec, InputPoint(y)), base).distance;
      const double d2 =
          mahalanobis(lift(spec, InputPoint(Eigen::VectorXd(y - t))), shifted)
              .distance;
      if (!std::isfinite(d1)) continue;
      CHECK(d1 == doctest::Approx(d2).epsilon(1e-9));
    }
  }
}

TEST_CASE("to_geometric: line and plane exports") {
  {
    const auto geo = to_geometric(spec_for(ModelId::Line2d), vec({0, 1}), 5.0);
    const auto& line = std::get<LineParams>(geo);
    CHECK(line.normal.isApprox(Eigen::Vector2d(0, 1), 1e-12));
    CHECK(line.offset == doctest::Approx(5.0));
  }
  {
    const auto geo =
        to_geometric(spec_for(ModelId::Plane3d), vec({0, 0, 2}), 4.0);
    const auto& plane = std::get<PlaneParams>(geo);
    CHECK(plane.normal.isApprox(Eigen::Vector3d(0, 0, 1), 1e-12));
    CHECK(plane.offset == doctest::Approx(2.0));
  }
}

TEST_CASE("to_geometric: rotated ellipse parameters recovered") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  const Eigen::Vector2d center(1.5, -0.5);
  const double a = 2.0, b = 0.7, angle = 0.4;
  std::vector<InputPoint> pts;
  for (double phi : {0.2, 1.3, 2.4, 3.8, 5.1})
    pts.emplace_back(ellipse_point(center, a, b, angle, phi));
  const ElementalResult res = solve_elemental(spec, pts);
  REQUIRE(res.hypothesis.has_value());
  const auto geo = to_geometric(spec, res.hypothesis->theta, res.hypothesis->alpha);
  const auto& el = std::get<EllipseParams>(geo);
  CHECK((el.center - center).norm() <= 1e-8);
  CHECK(el.semi_major == doctest::Approx(a).epsilon(1e-8));
  CHECK(el.semi_minor == doctest::Approx(b).epsilon(1e-8));
  CHECK(el.angle == doctest::Approx(angle).epsilon(1e-6));
}

TEST_CASE("to_geometric rejects a non-ellipse direction") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  CHECK_THROWS_AS(to_geometric(spec, vec({0, 0, 1, 0, -1}).normalized(), 0.3),
                  InvalidInputError);
}
