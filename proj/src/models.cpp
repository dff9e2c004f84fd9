#include "misre/models.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <unordered_map>

namespace misre {

namespace {

constexpr double kRankTol = 1e-9;

// Relative tolerances of the cylinder quadric shape test.
constexpr double kCylinderSvTol = 0.05;
constexpr double kCylinderEigTol = 0.05;

const ModelSpec kSpecs[] = {
    {ModelId::Line2d, 2, 2, 1, 2, false, true, 1, {{{0, 2}, {0, 0}}}},
    {ModelId::Plane3d, 3, 3, 1, 3, false, true, 1, {{{0, 3}, {0, 0}}}},
    {ModelId::Ellipse2d, 2, 5, 1, 5, false, false, 1, {{{0, 2}, {0, 0}}}},
    {ModelId::Sphere3d, 3, 4, 1, 4, false, false, 1, {{{0, 3}, {0, 0}}}},
    {ModelId::Cylinder3d, 3, 9, 1, 9, false, false, 1, {{{0, 3}, {0, 0}}}},
    {ModelId::Fundamental, 4, 8, 1, 8, false, false, 2, {{{0, 2}, {2, 2}}}},
    {ModelId::Homography, 4, 9, 2, 4, true, false, 2, {{{0, 2}, {2, 2}}}},
};

}  // namespace

const ModelSpec& spec_for(ModelId id) { return kSpecs[static_cast<int>(id)]; }

ModelId model_from_string(const std::string& name) {
  static const std::unordered_map<std::string, ModelId> table = {
      {"line2d", ModelId::Line2d},           {"plane3d", ModelId::Plane3d},
      {"ellipse2d", ModelId::Ellipse2d},     {"sphere3d", ModelId::Sphere3d},
      {"cylinder3d", ModelId::Cylinder3d},   {"fundamental", ModelId::Fundamental},
      {"homography", ModelId::Homography},
  };
  auto it = table.find(name);
  if (it == table.end()) throw InvalidInputError("unknown model: " + name);
  return it->second;
}

std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::Line2d: return "line2d";
    case ModelId::Plane3d: return "plane3d";
    case ModelId::Ellipse2d: return "ellipse2d";
    case ModelId::Sphere3d: return "sphere3d";
    case ModelId::Cylinder3d: return "cylinder3d";
    case ModelId::Fundamental: return "fundamental";
    case ModelId::Homography: return "homography";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Carrier lifting
// ---------------------------------------------------------------------------

Eigen::MatrixXd carriers_of(const ModelSpec& spec, const Eigen::VectorXd& y) {
  Eigen::MatrixXd out(spec.channel_count, spec.carrier_dim);
  switch (spec.id) {
    case ModelId::Line2d:
    case ModelId::Plane3d:
      out.row(0) = y.transpose();
      break;
    case ModelId::Ellipse2d:
      out.row(0) << y(0), y(1), y(0) * y(0), y(0) * y(1), y(1) * y(1);
      break;
    case ModelId::Sphere3d:
      out.row(0) << y.squaredNorm(), y(0), y(1), y(2);
      break;
    case ModelId::Cylinder3d:
      out.row(0) << y(0) * y(0), y(0) * y(1), y(0) * y(2), y(1) * y(1),
          y(1) * y(2), y(2) * y(2), y(0), y(1), y(2);
      break;
    case ModelId::Fundamental: {
      const double x = y(0), yy = y(1), xp = y(2), yp = y(3);
      out.row(0) << x, yy, xp, yp, x * xp, x * yp, yy * xp, yy * yp;
      break;
    }
    case ModelId::Homography: {
      const double x = y(0), yy = y(1), xp = y(2), yp = y(3);
      out.row(0) << -x, -yy, -1.0, 0, 0, 0, xp * x, xp * yy, xp;
      out.row(1) << 0, 0, 0, -x, -yy, -1.0, yp * x, yp * yy, yp;
      break;
    }
  }
  return out;
}

namespace {

Eigen::MatrixXd jacobian_of(const ModelSpec& spec, const Eigen::VectorXd& y,
                            int channel) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(spec.carrier_dim, spec.input_dim);
  switch (spec.id) {
    case ModelId::Line2d:
    case ModelId::Plane3d:
      jac.setIdentity();
      break;
    case ModelId::Ellipse2d:
      jac << 1, 0,
             0, 1,
             2 * y(0), 0,
             y(1), y(0),
             0, 2 * y(1);
      break;
    case ModelId::Sphere3d:
      jac << 2 * y(0), 2 * y(1), 2 * y(2),
             1, 0, 0,
             0, 1, 0,
             0, 0, 1;
      break;
    case ModelId::Cylinder3d:
      jac << 2 * y(0), 0, 0,
             y(1), y(0), 0,
             y(2), 0, y(0),
             0, 2 * y(1), 0,
             0, y(2), y(1),
             0, 0, 2 * y(2),
             1, 0, 0,
             0, 1, 0,
             0, 0, 1;
      break;
    case ModelId::Fundamental: {
      const double x = y(0), yy = y(1), xp = y(2), yp = y(3);
      jac << 1, 0, 0, 0,
             0, 1, 0, 0,
             0, 0, 1, 0,
             0, 0, 0, 1,
             xp, 0, x, 0,
             yp, 0, 0, x,
             0, xp, yy, 0,
             0, yp, 0, yy;
      break;
    }
    case ModelId::Homography: {
      const double x = y(0), yy = y(1), xp = y(2), yp = y(3);
      if (channel == 0) {
        jac(0, 0) = -1;
        jac(1, 1) = -1;
        jac(6, 0) = xp; jac(6, 2) = x;
        jac(7, 1) = xp; jac(7, 2) = yy;
        jac(8, 2) = 1;
      } else {
        jac(3, 0) = -1;
        jac(4, 1) = -1;
        jac(6, 0) = yp; jac(6, 3) = x;
        jac(7, 1) = yp; jac(7, 3) = yy;
        jac(8, 3) = 1;
      }
      break;
    }
  }
  return jac;
}

}  // namespace

CarrierSet lift(const ModelSpec& spec, const InputPoint& point) {
  if (point.y.size() != spec.input_dim)
    throw InvalidInputError("point dimension " + std::to_string(point.y.size()) +
                            " does not match model input dimension " +
                            std::to_string(spec.input_dim));
  if (point.cov.rows() != spec.input_dim || point.cov.cols() != spec.input_dim)
    throw InvalidInputError("covariance shape does not match input dimension");

  const Eigen::MatrixXd x = carriers_of(spec, point.y);
  CarrierSet set;
  set.channels.resize(spec.channel_count);
  for (int c = 0; c < spec.channel_count; ++c) {
    CarrierChannel& ch = set.channels[c];
    ch.x = x.row(c).transpose();
    ch.jac = jacobian_of(spec, point.y, c);
    ch.cov = ch.jac * point.cov * ch.jac.transpose();
  }
  return set;
}

Eigen::VectorXd algebraic_residuals(const ModelSpec& spec,
                                    const Eigen::VectorXd& theta, double alpha,
                                    const Eigen::VectorXd& y) {
  const Eigen::MatrixXd x = carriers_of(spec, y);
  return x * theta - Eigen::VectorXd::Constant(spec.channel_count, alpha);
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

namespace {

// Symmetric quadratic-term matrix of the ellipse relation.
Eigen::Matrix2d ellipse_quadratic(const Eigen::VectorXd& theta) {
  Eigen::Matrix2d m;
  m << theta(2), theta(3) / 2.0, theta(3) / 2.0, theta(4);
  return m;
}

// Quadratic-term matrix and linear-term vector of the cylinder quadric.
void cylinder_parts(const Eigen::VectorXd& theta, Eigen::Matrix3d& D,
                    Eigen::Vector3d& d) {
  D << theta(0), theta(1) / 2.0, theta(2) / 2.0,
       theta(1) / 2.0, theta(3), theta(4) / 2.0,
       theta(2) / 2.0, theta(4) / 2.0, theta(5);
  d << theta(6) / 2.0, theta(7) / 2.0, theta(8) / 2.0;
}

}  // namespace

bool validate_constraints(const ModelSpec& spec, const Eigen::VectorXd& theta,
                          double alpha) {
  (void)alpha;
  switch (spec.id) {
    case ModelId::Ellipse2d: {
      const double disc = 4.0 * theta(2) * theta(4) - theta(3) * theta(3);
      if (!(disc > 0.0)) return false;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(ellipse_quadratic(theta));
      const double lo = std::min(std::abs(es.eigenvalues()(0)),
                                 std::abs(es.eigenvalues()(1)));
      const double hi = std::max(std::abs(es.eigenvalues()(0)),
                                 std::abs(es.eigenvalues()(1)));
      // axis ratio = sqrt(hi / lo), bounded at 10
      return hi <= 100.0 * lo;
    }
    case ModelId::Cylinder3d: {
      Eigen::Matrix3d D;
      Eigen::Vector3d d;
      cylinder_parts(theta, D, d);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(D);
      Eigen::Vector3d sv = es.eigenvalues().cwiseAbs();
      std::sort(sv.data(), sv.data() + 3, std::greater<double>());
      if (sv(0) <= 1e-12) return false;  // quadratic part vanished
      if ((sv(0) - sv(1)) / sv(0) > kCylinderSvTol) return false;
      if (sv(2) / sv(0) > kCylinderSvTol) return false;
      const double dn = d.norm();
      if (dn <= 1e-12) return true;  // axis through the origin
      const Eigen::Vector3d dh = d / dn;
      const double lambda = dh.dot(D * dh);
      return (D * dh - lambda * dh).norm() <= kCylinderEigTol;
    }
    default:
      return true;
  }
}

// ---------------------------------------------------------------------------
// Elemental solving
// ---------------------------------------------------------------------------

namespace {

// Deterministic sign: largest-magnitude component of theta made positive.
void canonicalize(Eigen::VectorXd& theta, double& alpha) {
  int imax = 0;
  theta.cwiseAbs().maxCoeff(&imax);
  if (theta(imax) < 0) {
    theta = -theta;
    alpha = -alpha;
  }
}

}  // namespace

ElementalResult solve_elemental(const ModelSpec& spec,
                                const Eigen::MatrixXd& stacked_carriers) {
  const int m = spec.carrier_dim;
  const int rows = spec.elemental_size * spec.channel_count;
  if (stacked_carriers.rows() != rows || stacked_carriers.cols() != m)
    throw InvalidInputError("elemental subset has wrong shape");

  ElementalResult result;
  Eigen::VectorXd theta;
  double alpha = 0.0;

  if (spec.intercept_is_zero) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked_carriers, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    // nullspace must be exactly one-dimensional
    if (s(rows - 1) <= kRankTol * s(0)) {
      result.failure = SolveFailure::RankDeficient;
      return result;
    }
    theta = svd.matrixV().col(m - 1);
  } else {
    const Eigen::RowVectorXd mean = stacked_carriers.colwise().mean();
    const Eigen::MatrixXd centered = stacked_carriers.rowwise() - mean;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    // the smallest singular value is structurally zero; uniqueness of the
    // solution requires the one above it to be well separated from zero
    if (s(m - 2) <= kRankTol * s(0)) {
      result.failure = SolveFailure::RankDeficient;
      return result;
    }
    theta = svd.matrixV().col(m - 1);
    alpha = mean * theta;
  }

  canonicalize(theta, alpha);
  if (!validate_constraints(spec, theta, alpha)) {
    result.failure = SolveFailure::Constraint;
    return result;
  }
  Hypothesis h;
  h.theta = std::move(theta);
  h.alpha = alpha;
  result.hypothesis = std::move(h);
  return result;
}

ElementalResult solve_elemental(const ModelSpec& spec,
                                std::span<const InputPoint> subset) {
  if (static_cast<int>(subset.size()) != spec.elemental_size)
    throw InvalidInputError("elemental subset must have exactly " +
                            std::to_string(spec.elemental_size) + " points");
  Eigen::MatrixXd stacked(spec.elemental_size * spec.channel_count,
                          spec.carrier_dim);
  for (int i = 0; i < spec.elemental_size; ++i)
    stacked.middleRows(i * spec.channel_count, spec.channel_count) =
        carriers_of(spec, subset[i].y);
  return solve_elemental(spec, stacked);
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

Eigen::VectorXd NormalizationTransform::apply(const ModelSpec& spec,
                                              const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(y.size());
  for (int b = 0; b < spec.block_count; ++b) {
    const auto& blk = spec.blocks[b];
    out.segment(blk.offset, blk.dim) =
        blocks[b].scale *
        (y.segment(blk.offset, blk.dim) - blocks[b].translation);
  }
  return out;
}

Eigen::VectorXd NormalizationTransform::invert(const ModelSpec& spec,
                                               const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(y.size());
  for (int b = 0; b < spec.block_count; ++b) {
    const auto& blk = spec.blocks[b];
    out.segment(blk.offset, blk.dim) =
        y.segment(blk.offset, blk.dim) / blocks[b].scale +
        blocks[b].translation;
  }
  return out;
}

std::pair<std::vector<Eigen::VectorXd>, NormalizationTransform> normalize_points(
    const ModelSpec& spec, std::span<const Eigen::VectorXd> points) {
  if (points.empty()) throw InvalidInputError("empty point list");
  const int n = static_cast<int>(points.size());
  for (const auto& p : points)
    if (p.size() != spec.input_dim)
      throw InvalidInputError("point dimension does not match model");

  NormalizationTransform tf;
  tf.blocks.resize(spec.block_count);
  double log_scale_sum = 0.0;
  for (int b = 0; b < spec.block_count; ++b) {
    const auto& blk = spec.blocks[b];
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(blk.dim);
    for (const auto& p : points) centroid += p.segment(blk.offset, blk.dim);
    centroid /= n;
    double mean_norm = 0.0;
    for (const auto& p : points)
      mean_norm += (p.segment(blk.offset, blk.dim) - centroid).norm();
    mean_norm /= n;
    if (mean_norm <= 1e-300)
      throw DegenerateInputError("all points coincident in coordinate block " +
                                 std::to_string(b));
    tf.blocks[b].translation = centroid;
    tf.blocks[b].scale = std::sqrt(static_cast<double>(blk.dim)) / mean_norm;
    log_scale_sum += blk.dim * std::log(tf.blocks[b].scale);
  }
  tf.distance_scale = std::exp(log_scale_sum / spec.input_dim);

  std::vector<Eigen::VectorXd> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(tf.apply(spec, p));
  return {std::move(out), std::move(tf)};
}

// ---------------------------------------------------------------------------
// Denormalization
// ---------------------------------------------------------------------------

namespace {

// Homogeneous matrix of y_b' = s (y_b - t), one coordinate block.
Eigen::MatrixXd block_homogeneous(const BlockTransform& bt) {
  const int d = static_cast<int>(bt.translation.size());
  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(d + 1, d + 1);
  T.topLeftCorner(d, d) *= bt.scale;
  T.topRightCorner(d, 1) = -bt.scale * bt.translation;
  return T;
}

Eigen::MatrixXd quadric_of(const ModelSpec& spec, const Eigen::VectorXd& theta,
                           double alpha) {
  switch (spec.id) {
    case ModelId::Ellipse2d: {
      Eigen::Matrix3d q;
      q << theta(2), theta(3) / 2, theta(0) / 2,
           theta(3) / 2, theta(4), theta(1) / 2,
           theta(0) / 2, theta(1) / 2, -alpha;
      return q;
    }
    case ModelId::Sphere3d: {
      Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
      q(0, 0) = q(1, 1) = q(2, 2) = theta(0);
      q(0, 3) = q(3, 0) = theta(1) / 2;
      q(1, 3) = q(3, 1) = theta(2) / 2;
      q(2, 3) = q(3, 2) = theta(3) / 2;
      q(3, 3) = -alpha;
      return q;
    }
    case ModelId::Cylinder3d: {
      Eigen::Matrix4d q;
      q << theta(0), theta(1) / 2, theta(2) / 2, theta(6) / 2,
           theta(1) / 2, theta(3), theta(4) / 2, theta(7) / 2,
           theta(2) / 2, theta(4) / 2, theta(5), theta(8) / 2,
           theta(6) / 2, theta(7) / 2, theta(8) / 2, -alpha;
      return q;
    }
    default:
      throw Error("quadric_of: not a quadric model");
  }
}

void quadric_unpack(const ModelSpec& spec, const Eigen::MatrixXd& q,
                    Eigen::VectorXd& theta, double& alpha) {
  switch (spec.id) {
    case ModelId::Ellipse2d:
      theta.resize(5);
      theta << 2 * q(0, 2), 2 * q(1, 2), q(0, 0), 2 * q(0, 1), q(1, 1);
      alpha = -q(2, 2);
      break;
    case ModelId::Sphere3d:
      theta.resize(4);
      theta << q(0, 0), 2 * q(0, 3), 2 * q(1, 3), 2 * q(2, 3);
      alpha = -q(3, 3);
      break;
    case ModelId::Cylinder3d:
      theta.resize(9);
      theta << q(0, 0), 2 * q(0, 1), 2 * q(0, 2), q(1, 1), 2 * q(1, 2), q(2, 2),
          2 * q(0, 3), 2 * q(1, 3), 2 * q(2, 3);
      alpha = -q(3, 3);
      break;
    default:
      throw Error("quadric_unpack: not a quadric model");
  }
}

Eigen::Matrix3d fundamental_matrix_of(const Eigen::VectorXd& theta, double alpha) {
  Eigen::Matrix3d f;
  f << theta(4), theta(6), theta(2),
       theta(5), theta(7), theta(3),
       theta(0), theta(1), -alpha;
  return f;
}

void fundamental_unpack(const Eigen::Matrix3d& f, Eigen::VectorXd& theta,
                        double& alpha) {
  theta.resize(8);
  theta << f(2, 0), f(2, 1), f(0, 2), f(1, 2), f(0, 0), f(1, 0), f(0, 1), f(1, 1);
  alpha = -f(2, 2);
}

Eigen::Matrix3d homography_matrix_of(const Eigen::VectorXd& theta) {
  Eigen::Matrix3d h;
  h << theta(0), theta(1), theta(2),
       theta(3), theta(4), theta(5),
       theta(6), theta(7), theta(8);
  return h;
}

}  // namespace

DenormalizedStructure denormalize_structure(const ModelSpec& spec,
                                            const Eigen::VectorXd& theta,
                                            double alpha, double sigma,
                                            const NormalizationTransform& tf) {
  for (const auto& bt : tf.blocks)
    if (!(bt.scale > 0) || !std::isfinite(bt.scale))
      throw Error("singular normalization transform");

  DenormalizedStructure out;
  out.sigma = sigma / tf.distance_scale;

  switch (spec.id) {
    case ModelId::Line2d:
    case ModelId::Plane3d: {
      const auto& bt = tf.blocks[0];
      out.theta = theta;
      out.alpha = alpha / bt.scale + theta.dot(bt.translation);
      break;
    }
    case ModelId::Ellipse2d:
    case ModelId::Sphere3d:
    case ModelId::Cylinder3d: {
      const Eigen::MatrixXd T = block_homogeneous(tf.blocks[0]);
      const Eigen::MatrixXd q =
          T.transpose() * quadric_of(spec, theta, alpha) * T;
      quadric_unpack(spec, q, out.theta, out.alpha);
      break;
    }
    case ModelId::Fundamental: {
      const Eigen::Matrix3d t1 = block_homogeneous(tf.blocks[0]);
      const Eigen::Matrix3d t2 = block_homogeneous(tf.blocks[1]);
      const Eigen::Matrix3d f =
          t2.transpose() * fundamental_matrix_of(theta, alpha) * t1;
      fundamental_unpack(f, out.theta, out.alpha);
      break;
    }
    case ModelId::Homography: {
      const Eigen::Matrix3d t1 = block_homogeneous(tf.blocks[0]);
      const Eigen::Matrix3d t2 = block_homogeneous(tf.blocks[1]);
      const Eigen::Matrix3d h =
          t2.inverse() * homography_matrix_of(theta) * t1;
      out.theta.resize(9);
      out.theta << h(0, 0), h(0, 1), h(0, 2), h(1, 0), h(1, 1), h(1, 2),
          h(2, 0), h(2, 1), h(2, 2);
      out.alpha = 0.0;
      break;
    }
  }

  const double norm = out.theta.norm();
  if (!(norm > 0)) throw Error("denormalization produced a zero direction");
  out.theta /= norm;
  out.alpha /= norm;
  canonicalize(out.theta, out.alpha);
  return out;
}

// ---------------------------------------------------------------------------
// Geometric conversion
// ---------------------------------------------------------------------------

GeometricParams to_geometric(const ModelSpec& spec, const Eigen::VectorXd& theta,
                             double alpha) {
  switch (spec.id) {
    case ModelId::Line2d: {
      LineParams p;
      const double n = theta.norm();
      p.normal = theta.head<2>() / n;
      p.offset = alpha / n;
      return p;
    }
    case ModelId::Plane3d: {
      PlaneParams p;
      const double n = theta.norm();
      p.normal = theta.head<3>() / n;
      p.offset = alpha / n;
      return p;
    }
    case ModelId::Ellipse2d: {
      Eigen::VectorXd th = theta;
      double al = alpha;
      if (th(2) + th(4) < 0) {  // orient so the quadratic part is positive
        th = -th;
        al = -al;
      }
      const Eigen::Matrix2d m = ellipse_quadratic(th);
      Eigen::Vector2d b(th(0), th(1));
      const double det = m.determinant();
      if (!(det > 0)) throw InvalidInputError("theta does not describe an ellipse");
      const Eigen::Vector2d center = m.ldlt().solve(-b / 2.0);
      const double k = center.dot(m * center) + b.dot(center) - al;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
      const double l0 = es.eigenvalues()(0);  // ascending, both positive here
      const double l1 = es.eigenvalues()(1);
      if (!(l0 > 0) || !(-k > 0))
        throw InvalidInputError("theta does not describe a real ellipse");
      EllipseParams p;
      p.center = center;
      p.semi_major = std::sqrt(-k / l0);
      p.semi_minor = std::sqrt(-k / l1);
      const Eigen::Vector2d axis = es.eigenvectors().col(0);
      double angle = std::atan2(axis(1), axis(0));
      if (angle < -M_PI / 2) angle += M_PI;
      if (angle >= M_PI / 2) angle -= M_PI;
      p.angle = angle;
      return p;
    }
    case ModelId::Sphere3d: {
      if (std::abs(theta(0)) < 1e-14)
        throw InvalidInputError("sphere estimate degenerated to a plane");
      SphereParams p;
      p.center = -theta.segment<3>(1) / (2.0 * theta(0));
      const double r2 = p.center.squaredNorm() + alpha / theta(0);
      if (!(r2 > 0)) throw InvalidInputError("negative squared radius");
      p.radius = std::sqrt(r2);
      return p;
    }
    case ModelId::Cylinder3d: {
      Eigen::Matrix3d D;
      Eigen::Vector3d d;
      cylinder_parts(theta, D, d);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(D);
      // the axis direction is the near-null eigenvector
      int null_idx = 0;
      es.eigenvalues().cwiseAbs().minCoeff(&null_idx);
      CylinderParams p;
      p.axis_dir = es.eigenvectors().col(null_idx);
      double lambda_dup = 0.0;
      Eigen::Vector3d pinv_d = Eigen::Vector3d::Zero();
      for (int i = 0; i < 3; ++i) {
        if (i == null_idx) continue;
        lambda_dup += es.eigenvalues()(i) / 2.0;
        pinv_d += es.eigenvectors().col(i) *
                  (es.eigenvectors().col(i).dot(d) / es.eigenvalues()(i));
      }
      if (std::abs(lambda_dup) < 1e-14)
        throw InvalidInputError("cylinder quadric has vanishing radial part");
      p.axis_point = -pinv_d;
      const double r2 = (d.dot(pinv_d) + alpha) / lambda_dup;
      if (!(r2 > 0)) throw InvalidInputError("negative squared cylinder radius");
      p.radius = std::sqrt(r2);
      if (p.axis_dir(2) < 0 || (p.axis_dir(2) == 0 && p.axis_dir(1) < 0))
        p.axis_dir = -p.axis_dir;
      return p;
    }
    case ModelId::Fundamental: {
      Eigen::Matrix3d f = fundamental_matrix_of(theta, alpha);
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(
          f, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::Vector3d s = svd.singularValues();
      s(2) = 0.0;  // rank-2 projection at export
      MatrixParams p;
      p.matrix = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
      return p;
    }
    case ModelId::Homography: {
      MatrixParams p;
      p.matrix = homography_matrix_of(theta);
      return p;
    }
  }
  throw Error("unreachable");
}

}  // namespace misre
