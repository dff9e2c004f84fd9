#include "misre/pipeline.hpp"

#include "misre/engine.hpp"
#include "misre/models.hpp"
#include "misre/parallel.hpp"
#include "misre/refine.hpp"
#include "misre/rng.hpp"
#include "misre/scale.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace misre {

namespace {

// Effective-scale floor in normalized units; keeps exact (zero-noise)
// structures classifiable.
constexpr double kNormalizedSigmaFloor = 1e-7;

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

struct ExtractOutcome {
  bool produced = false;
  bool terminated = false;  // sampling failed outright, stop the loop
  std::vector<int> claimed_rows;
  Structure structure;  // normalized-frame theta/alpha/sigma at this stage
};

ExtractOutcome extract_structure(const CarrierTable& working,
                                 const EstimationConfig& config,
                                 std::uint64_t iteration, int threads,
                                 IterationDiagnostics& diag) {
  const ModelSpec& spec = working.spec();
  const int n = working.size();
  const int n_eps = initial_set_size(spec, n, config.epsilon);
  diag.remaining = n;
  diag.n_epsilon = n_eps;

  ExtractOutcome out;

  std::vector<Hypothesis> hypotheses;
  try {
    hypotheses = sample_hypotheses(
        working, config.trials,
        substream(config.seed, {0x5a3fULL, iteration}), &diag.rejections,
        threads);
  } catch (const SamplingFailureError& e) {
    diag.failed = true;
    diag.failure_reason = e.what();
    out.terminated = true;
    return out;
  }

  ScoredHypothesis winner = select_best(working, hypotheses, n_eps, threads);
  diag.winner_score = winner.score;

  std::vector<double> sorted(n);
  for (int i = 0; i < n; ++i) sorted[i] = winner.sorted_records[i].distance;
  diag.scale = estimate_scale(sorted, config.epsilon);
  const double sigma_eff =
      std::max(diag.scale.sigma, kNormalizedSigmaFloor);
  diag.sigma_effective = sigma_eff;

  const int refine_trials = std::max(1, config.trials / 10);
  RefineOutcome refined =
      refine(working, winner, sigma_eff, refine_trials,
             substream(config.seed, {0x4ef1ULL, iteration}), &diag.rejections,
             threads);
  diag.refine_fell_back = refined.fell_back;
  diag.refine_kde_height = refined.kde_height;

  std::vector<int> inlier_rows =
      classify_inliers(working, refined.theta, refined.alpha, sigma_eff,
                       config.trajectory_classification, threads);
  diag.inliers_classified = static_cast<int>(inlier_rows.size());

  if (inlier_rows.empty()) {
    // nothing claimed: drop the initial set to guarantee progress
    diag.failed = true;
    diag.failure_reason = "structure claimed no points";
    const int drop = std::min(n_eps, n);
    out.claimed_rows.reserve(drop);
    const std::vector<int>& originals = working.original_indices();
    for (int k = 0; k < drop; ++k) {
      const int orig = winner.sorted_records[k].point_index;
      const auto it =
          std::lower_bound(originals.begin(), originals.end(), orig);
      out.claimed_rows.push_back(static_cast<int>(it - originals.begin()));
    }
    std::sort(out.claimed_rows.begin(), out.claimed_rows.end());
    diag.removed_on_failure = drop;
    return out;
  }

  Structure s;
  s.model = spec.id;
  s.sigma_expansion = diag.scale.sigma;
  if (static_cast<int>(inlier_rows.size()) >= spec.elemental_size) {
    const TlsFit fit =
        tls_refit(working, inlier_rows, refined.theta, refined.alpha);
    s.theta = fit.theta;
    s.alpha = fit.alpha;
    s.sigma = fit.sigma;
    s.constraint_fallback = fit.constraint_fallback;
  } else {
    s.tls_skipped = true;
    s.theta = refined.theta;
    s.alpha = refined.alpha;
    double sigma = 0.0;
    for (int r : inlier_rows) {
      const double d = working.distance(r, s.theta, s.alpha).distance;
      if (std::isfinite(d)) sigma = std::max(sigma, d);
    }
    s.sigma = sigma;
  }
  s.inlier_indices.reserve(inlier_rows.size());
  for (int r : inlier_rows) s.inlier_indices.push_back(working.original_index(r));

  out.produced = true;
  out.structure = std::move(s);
  out.claimed_rows = std::move(inlier_rows);
  return out;
}

}  // namespace

double strength(int inlier_count, double sigma_tls) {
  if (sigma_tls < 0) throw InvalidInputError("negative scale");
  return inlier_count / std::max(sigma_tls, kSigmaFloor);
}

EstimationResult run(std::span<const Eigen::VectorXd> points,
                     const EstimationConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  const ModelSpec& spec = spec_for(config.model);
  if (config.trials < 1) throw InvalidInputError("trial count must be >= 1");
  if (!(config.epsilon >= 1.0 && config.epsilon <= 20.0))
    throw InvalidInputError("epsilon percent must lie in [1, 20]");
  const int n = static_cast<int>(points.size());
  if (n < initial_set_size(spec, n, config.epsilon))
    throw InvalidInputError("fewer points than the initial set size");
  if (!config.covariances.empty()) {
    if (static_cast<int>(config.covariances.size()) != n)
      throw InvalidInputError("covariance count does not match point count");
    for (const auto& c : config.covariances) {
      if (c.rows() != spec.input_dim || c.cols() != spec.input_dim)
        throw InvalidInputError("covariance shape does not match input");
      if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidInputError("covariance basis must be symmetric");
      if (std::abs(c.determinant() - 1.0) > 1e-9 * std::abs(c.determinant()) + 1e-9)
        throw InvalidInputError("covariance basis must have unit determinant");
    }
  }

  const int threads = resolve_thread_count(config.threads);

  EstimationResult result;
  auto [normalized, tf] = normalize_points(spec, points);

  // Covariance bases are re-normalized to unit determinant in the scaled
  // frame; the uniform factor is absorbed by the unknown scale.
  std::vector<Eigen::MatrixXd> norm_covs;
  if (!config.covariances.empty()) {
    Eigen::VectorXd s(spec.input_dim);
    for (int b = 0; b < spec.block_count; ++b)
      s.segment(spec.blocks[b].offset, spec.blocks[b].dim)
          .setConstant(tf.blocks[b].scale);
    norm_covs.reserve(n);
    for (const auto& c : config.covariances) {
      Eigen::MatrixXd scaled = s.asDiagonal() * c * s.asDiagonal();
      scaled /= std::pow(scaled.determinant(), 1.0 / spec.input_dim);
      norm_covs.push_back(std::move(scaled));
    }
  }
  result.transform = tf;

  const CarrierTable master(spec, normalized, norm_covs);

  std::vector<int> working_rows(n);
  for (int i = 0; i < n; ++i) working_rows[i] = i;

  std::vector<Structure> structures;
  std::uint64_t iteration = 0;
  while (static_cast<int>(working_rows.size()) >=
             initial_set_size(spec, static_cast<int>(working_rows.size()),
                              config.epsilon) &&
         static_cast<int>(working_rows.size()) >= spec.elemental_size) {
    const auto t_iter = std::chrono::steady_clock::now();
    const CarrierTable working = master.subset(working_rows);
    IterationDiagnostics diag;
    ExtractOutcome out =
        extract_structure(working, config, iteration, threads, diag);
    diag.elapsed_ms = elapsed_ms(t_iter);
    result.iterations.push_back(diag);
    ++iteration;
    if (out.terminated) break;

    // map claimed working rows back to master rows and shrink the set
    std::vector<int> claimed_master;
    claimed_master.reserve(out.claimed_rows.size());
    for (int r : out.claimed_rows) claimed_master.push_back(working_rows[r]);
    std::vector<int> next;
    next.reserve(working_rows.size() - claimed_master.size());
    std::set_difference(working_rows.begin(), working_rows.end(),
                        claimed_master.begin(), claimed_master.end(),
                        std::back_inserter(next));
    if (next.size() == working_rows.size()) break;  // no progress
    working_rows = std::move(next);

    if (out.produced) {
      Structure s = std::move(out.structure);
      const DenormalizedStructure den =
          denormalize_structure(spec, s.theta, s.alpha, s.sigma, tf);
      s.theta = den.theta;
      s.alpha = den.alpha;
      s.sigma = den.sigma;
      s.sigma_expansion /= tf.distance_scale;
      s.sigma_exact = s.sigma < kSigmaFloor;
      s.strength = strength(static_cast<int>(s.inlier_indices.size()), s.sigma);
      try {
        s.geometry = to_geometric(spec, s.theta, s.alpha);
      } catch (const InvalidInputError&) {
        s.geometry.reset();  // degenerate locus, parameters still reported
      }
      s.extraction_order = static_cast<int>(structures.size());
      structures.push_back(std::move(s));
    }
  }

  std::sort(structures.begin(), structures.end(),
            [](const Structure& a, const Structure& b) {
              if (a.strength != b.strength) return a.strength > b.strength;
              if (a.inlier_indices.size() != b.inlier_indices.size())
                return a.inlier_indices.size() > b.inlier_indices.size();
              return a.extraction_order < b.extraction_order;
            });
  result.structures = std::move(structures);

  std::vector<char> claimed(n, 0);
  for (const auto& s : result.structures)
    for (int i : s.inlier_indices) claimed[i] = 1;
  for (int i = 0; i < n; ++i)
    if (!claimed[i]) result.residual_indices.push_back(i);

  result.total_ms = elapsed_ms(t_start);
  return result;
}

}  // namespace misre
