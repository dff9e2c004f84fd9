#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace misre {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Raised when the elemental-subset sampler exhausts its rejection budget.
class SamplingFailureError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Model catalogue
// ---------------------------------------------------------------------------

enum class ModelId {
  Line2d,
  Plane3d,
  Ellipse2d,
  Sphere3d,
  Cylinder3d,
  Fundamental,
  Homography,
};

/// Coordinate block of the measurement vector that is normalized as one unit
/// (two-view models carry one block per image).
struct CoordinateBlock {
  int offset = 0;
  int dim = 0;
};

/// Static description of one estimation problem in its linearized form.
struct ModelSpec {
  ModelId id;
  int input_dim;       ///< l, length of a measurement vector
  int carrier_dim;     ///< m, length of a lifted carrier vector
  int channel_count;   ///< number of carrier vectors per input point
  int elemental_size;  ///< points needed to determine (theta, alpha)
  bool intercept_is_zero;    ///< homogeneous relation, alpha fixed at 0
  bool identity_jacobian;    ///< carrier equals input, Jacobian constant I
  int block_count;
  std::array<CoordinateBlock, 2> blocks;
};

const ModelSpec& spec_for(ModelId id);
ModelId model_from_string(const std::string& name);
std::string to_string(ModelId id);

// ---------------------------------------------------------------------------
// Core value types
// ---------------------------------------------------------------------------

/// One measurement with its covariance basis (unit determinant; the unknown
/// scale multiplier is estimated per structure).
struct InputPoint {
  Eigen::VectorXd y;
  Eigen::MatrixXd cov;  ///< l x l, symmetric positive definite, det = 1

  InputPoint() = default;
  explicit InputPoint(Eigen::VectorXd y_)
      : y(std::move(y_)), cov(Eigen::MatrixXd::Identity(y.size(), y.size())) {}
  InputPoint(Eigen::VectorXd y_, Eigen::MatrixXd cov_)
      : y(std::move(y_)), cov(std::move(cov_)) {}
};

/// One carrier channel of a lifted point.
struct CarrierChannel {
  Eigen::VectorXd x;    ///< carrier vector, length m
  Eigen::MatrixXd jac;  ///< m x l Jacobian of the carrier map
  Eigen::MatrixXd cov;  ///< m x m propagated covariance J C_y J^T
};

struct CarrierSet {
  std::vector<CarrierChannel> channels;
};

/// Candidate structure from one elemental subset: unit direction and
/// intercept of the linear relation in carrier space.
struct Hypothesis {
  Eigen::VectorXd theta;
  double alpha = 0.0;
  std::vector<int> subset;  ///< point indices that produced the hypothesis
  int index = 0;            ///< ordinal within its sampling batch
};

/// Per-block similarity transform: y' = scale * (y - translation).
struct BlockTransform {
  Eigen::VectorXd translation;
  double scale = 1.0;
};

struct NormalizationTransform {
  std::vector<BlockTransform> blocks;
  /// Factor by which distances in the normalized frame exceed distances in
  /// the source frame (geometric mean of block scales weighted by dimension).
  double distance_scale = 1.0;

  Eigen::VectorXd apply(const ModelSpec& spec, const Eigen::VectorXd& y) const;
  Eigen::VectorXd invert(const ModelSpec& spec, const Eigen::VectorXd& y) const;
};

// ---------------------------------------------------------------------------
// Hypothesis scoring
// ---------------------------------------------------------------------------

/// Largest Mahalanobis distance of a point over its carrier channels,
/// in units of the structure's unknown scale.
struct DistanceRecord {
  int point_index = 0;
  double distance = 0.0;
  int channel = 0;
};

struct ScoredHypothesis {
  Hypothesis hypothesis;
  double score = 0.0;
  /// Ascending distance records over all points; materialized for the
  /// selected hypothesis only.
  std::vector<DistanceRecord> sorted_records;
};

// ---------------------------------------------------------------------------
// Scale estimation
// ---------------------------------------------------------------------------

struct ExpansionRecord {
  int eta = 0;         ///< percent position defining the segment width
  double delta = 0.0;  ///< segment width
  int k_t = 0;         ///< last segment before the density drop
  double extent = 0.0; ///< k_t * delta
};

enum class ScaleStatus { Normal, NoExpansion };

struct ScaleEstimate {
  double sigma = 0.0;
  int eta_start = -1;
  int eta_end = -1;
  std::vector<ExpansionRecord> records;
  ScaleStatus status = ScaleStatus::Normal;
};

// ---------------------------------------------------------------------------
// Mode seeking
// ---------------------------------------------------------------------------

struct ModeResult {
  double mode = 0.0;
  double kde_height = 0.0;
  int iterations = 0;
  bool no_support = false;
};

// ---------------------------------------------------------------------------
// Geometric exports
// ---------------------------------------------------------------------------

struct LineParams {
  Eigen::Vector2d normal;
  double offset;  ///< locus is normal . y = offset
};

struct PlaneParams {
  Eigen::Vector3d normal;
  double offset;
};

struct EllipseParams {
  Eigen::Vector2d center;
  double semi_major;
  double semi_minor;
  double angle;  ///< orientation of the major axis, radians
};

struct SphereParams {
  Eigen::Vector3d center;
  double radius;
};

struct CylinderParams {
  Eigen::Vector3d axis_point;
  Eigen::Vector3d axis_dir;
  double radius;
};

/// Fundamental matrix (rank-2 projected) or homography, 3x3.
struct MatrixParams {
  Eigen::Matrix3d matrix;
};

using GeometricParams = std::variant<LineParams, PlaneParams, EllipseParams,
                                     SphereParams, CylinderParams, MatrixParams>;

// ---------------------------------------------------------------------------
// Pipeline result types
// ---------------------------------------------------------------------------

/// Recovered segment in source coordinates.
struct Structure {
  std::vector<int> inlier_indices;
  Eigen::VectorXd theta;  ///< unit direction, source frame
  double alpha = 0.0;
  double sigma = 0.0;     ///< scale covering the classified inliers, source units
  double sigma_expansion = 0.0;  ///< expansion-criterion estimate, source units
  double strength = 0.0;  ///< inlier count divided by scale
  bool sigma_exact = false;     ///< scale hit the numeric floor
  bool tls_skipped = false;     ///< too few inliers for the refit
  bool constraint_fallback = false;  ///< TLS solution violated model constraints
  ModelId model;
  std::optional<GeometricParams> geometry;  ///< absent when export degenerates
  int extraction_order = 0;
};

struct EstimationConfig {
  ModelId model = ModelId::Line2d;
  int trials = 1000;       ///< M
  double epsilon = 5.0;    ///< percent size of the initial set
  std::uint64_t seed = 0;
  int threads = 0;         ///< 0: MISRE_THREADS env or hardware concurrency
  /// Optional per-point covariance bases (empty: identity).
  std::vector<Eigen::MatrixXd> covariances;
  /// Classify by the scale band around the mode (the default) or by per-point
  /// mean-shift trajectories. Trajectory claiming is unbounded for the
  /// quadric models (remote points carry proportionally huge bandwidths), so
  /// it is kept as a diagnostic mode only.
  bool trajectory_classification = false;
};

struct RejectionCounters {
  std::int64_t rank_deficient = 0;
  std::int64_t constraint = 0;
  std::int64_t budget_exhausted = 0;
  std::int64_t zero_variance_excluded = 0;
};

struct IterationDiagnostics {
  int remaining = 0;
  int n_epsilon = 0;
  double winner_score = 0.0;
  ScaleEstimate scale;
  double sigma_effective = 0.0;
  bool refine_fell_back = false;
  double refine_kde_height = 0.0;
  int inliers_classified = 0;
  bool failed = false;
  std::string failure_reason;
  int removed_on_failure = 0;
  RejectionCounters rejections;
  double elapsed_ms = 0.0;
};

struct EstimationResult {
  std::vector<Structure> structures;  ///< sorted by strength, descending
  std::vector<int> residual_indices;  ///< points never claimed
  std::vector<IterationDiagnostics> iterations;
  NormalizationTransform transform;
  double total_ms = 0.0;
};

}  // namespace misre
