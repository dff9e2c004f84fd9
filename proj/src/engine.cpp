#include "misre/engine.hpp"

#include "misre/parallel.hpp"
#include "misre/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace misre {

namespace {

constexpr double kVarianceFloor = 1e-15;
constexpr double kNumeratorFloor = 1e-12;
constexpr int kResampleBudget = 100;

double channel_distance(double z, double alpha, double h) {
  const double num = std::abs(z - alpha);
  if (h <= kVarianceFloor)
    return num > kNumeratorFloor ? std::numeric_limits<double>::infinity() : 0.0;
  return num / std::sqrt(h);
}

/// Bounded max-heap of the k smallest values seen.
class SmallestK {
 public:
  explicit SmallestK(int k) : k_(k) { heap_.reserve(k); }

  void offer(double d) {
    if (static_cast<int>(heap_.size()) < k_) {
      heap_.push_back(d);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (d < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = d;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  double sum() const {
    double s = 0.0;
    for (double d : heap_) s += d;
    return s;
  }

  void reset() { heap_.clear(); }

 private:
  int k_;
  std::vector<double> heap_;
};

}  // namespace

// ---------------------------------------------------------------------------
// CarrierTable
// ---------------------------------------------------------------------------

CarrierTable::CarrierTable(const ModelSpec& spec,
                           std::span<const Eigen::VectorXd> points,
                           std::span<const Eigen::MatrixXd> covariances) {
  spec_ = &spec;
  n_ = static_cast<int>(points.size());
  l_ = spec.input_dim;
  if (!covariances.empty() && covariances.size() != points.size())
    throw InvalidInputError("covariance count does not match point count");
  identity_jacobian_ = spec.identity_jacobian && covariances.empty();

  x_.assign(spec.channel_count, Eigen::MatrixXd(n_, spec.carrier_dim));
  jt_.assign(spec.channel_count,
             Eigen::MatrixXd(static_cast<Eigen::Index>(n_) * l_, spec.carrier_dim));
  original_index_.resize(n_);

  for (int i = 0; i < n_; ++i) {
    original_index_[i] = i;
    InputPoint p = covariances.empty() ? InputPoint(points[i])
                                       : InputPoint(points[i], covariances[i]);
    Eigen::MatrixXd lt;  // transposed Cholesky factor of the covariance basis
    if (!covariances.empty()) {
      Eigen::LLT<Eigen::MatrixXd> llt(p.cov);
      if (llt.info() != Eigen::Success)
        throw InvalidInputError("covariance basis is not positive definite");
      lt = llt.matrixL().transpose();
    }
    const CarrierSet set = lift(spec, p);
    for (int c = 0; c < spec.channel_count; ++c) {
      x_[c].row(i) = set.channels[c].x.transpose();
      if (covariances.empty())
        jt_[c].middleRows(static_cast<Eigen::Index>(i) * l_, l_) =
            set.channels[c].jac.transpose();
      else
        jt_[c].middleRows(static_cast<Eigen::Index>(i) * l_, l_) =
            lt * set.channels[c].jac.transpose();
    }
  }
}

CarrierTable CarrierTable::subset(std::span<const int> rows) const {
  CarrierTable out;
  out.spec_ = spec_;
  out.n_ = static_cast<int>(rows.size());
  out.l_ = l_;
  out.identity_jacobian_ = identity_jacobian_;
  out.x_.assign(x_.size(), Eigen::MatrixXd(out.n_, spec_->carrier_dim));
  out.jt_.assign(jt_.size(),
                 Eigen::MatrixXd(static_cast<Eigen::Index>(out.n_) * l_,
                                 spec_->carrier_dim));
  out.original_index_.resize(out.n_);
  for (int r = 0; r < out.n_; ++r) {
    const int src = rows[r];
    out.original_index_[r] = original_index_[src];
    for (size_t c = 0; c < x_.size(); ++c) {
      out.x_[c].row(r) = x_[c].row(src);
      out.jt_[c].middleRows(static_cast<Eigen::Index>(r) * l_, l_) =
          jt_[c].middleRows(static_cast<Eigen::Index>(src) * l_, l_);
    }
  }
  return out;
}

void CarrierTable::project(int channel, int row, const Eigen::VectorXd& theta,
                           double& z, double& h) const {
  z = x_[channel].row(row).dot(theta);
  if (identity_jacobian_)
    h = theta.squaredNorm();
  else
    h = (jt_[channel].middleRows(static_cast<Eigen::Index>(row) * l_, l_) * theta)
            .squaredNorm();
}

DistanceRecord CarrierTable::distance(int row, const Eigen::VectorXd& theta,
                                      double alpha) const {
  DistanceRecord rec{original_index_[row], -1.0, 0};
  for (int c = 0; c < spec_->channel_count; ++c) {
    double z, h;
    project(c, row, theta, z, h);
    const double d = channel_distance(z, alpha, h);
    if (d > rec.distance) {
      rec.distance = d;
      rec.channel = c;
    }
  }
  return rec;
}

void CarrierTable::distances(const Eigen::VectorXd& theta, double alpha,
                             std::span<double> out,
                             std::span<int> channel_out) const {
  const int zeta = spec_->channel_count;
  thread_local Eigen::VectorXd z[2], hv[2];
  for (int c = 0; c < zeta; ++c) {
    z[c].resize(n_);
    z[c].noalias() = x_[c] * theta;
    if (!identity_jacobian_) {
      hv[c].resize(static_cast<Eigen::Index>(n_) * l_);
      hv[c].noalias() = jt_[c] * theta;
    }
  }
  const double unit_h = identity_jacobian_ ? theta.squaredNorm() : 0.0;
  for (int i = 0; i < n_; ++i) {
    double best = -1.0;
    int best_c = 0;
    for (int c = 0; c < zeta; ++c) {
      const double h = identity_jacobian_
                           ? unit_h
                           : hv[c].segment(static_cast<Eigen::Index>(i) * l_, l_)
                                 .squaredNorm();
      const double d = channel_distance(z[c](i), alpha, h);
      if (d > best) {
        best = d;
        best_c = c;
      }
    }
    out[i] = best;
    if (!channel_out.empty()) channel_out[i] = best_c;
  }
}

Eigen::MatrixXd CarrierTable::stack_rows(std::span<const int> rows) const {
  const int zeta = spec_->channel_count;
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(rows.size()) * zeta,
                          spec_->carrier_dim);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < zeta; ++c)
      stacked.row(static_cast<Eigen::Index>(i) * zeta + c) = x_[c].row(rows[i]);
  return stacked;
}

// ---------------------------------------------------------------------------
// Distances and scoring
// ---------------------------------------------------------------------------

DistanceRecord mahalanobis(const CarrierSet& carrier_set, const Hypothesis& h) {
  DistanceRecord rec{0, -1.0, 0};
  for (size_t c = 0; c < carrier_set.channels.size(); ++c) {
    const auto& ch = carrier_set.channels[c];
    const double z = ch.x.dot(h.theta);
    const double var = h.theta.dot(ch.cov * h.theta);
    const double d = channel_distance(z, h.alpha, var);
    if (d > rec.distance) {
      rec.distance = d;
      rec.channel = static_cast<int>(c);
    }
  }
  return rec;
}

int initial_set_size(const ModelSpec& spec, int n, double epsilon_percent) {
  const double exact = epsilon_percent * n / 100.0;
  int n_eps;
  if (epsilon_percent == std::floor(epsilon_percent)) {
    const long long e = static_cast<long long>(epsilon_percent);
    n_eps = static_cast<int>((e * n + 99) / 100);
  } else {
    n_eps = static_cast<int>(std::ceil(exact));
  }
  return std::max(n_eps, 5 * spec.elemental_size);
}

namespace {

double score_rows(const CarrierTable& table, const Eigen::VectorXd& theta,
                  double alpha, int n_eps, std::vector<double>& dist_scratch) {
  dist_scratch.resize(table.size());
  table.distances(theta, alpha, dist_scratch);
  SmallestK sel(n_eps);
  for (double d : dist_scratch) sel.offer(d);
  return sel.sum();
}

}  // namespace

double score_hypothesis(const CarrierTable& table, const Hypothesis& h,
                        int n_eps) {
  if (n_eps > table.size())
    throw InvalidInputError("initial set larger than the point set");
  std::vector<double> scratch;
  return score_rows(table, h.theta, h.alpha, n_eps, scratch);
}

ScoredHypothesis select_best(const CarrierTable& table,
                             std::span<const Hypothesis> hypotheses, int n_eps,
                             int threads) {
  if (hypotheses.empty())
    throw SamplingFailureError("no hypotheses available for selection");
  const int m = static_cast<int>(hypotheses.size());
  std::vector<double> scores(m);
  parallel_for(0, m, threads, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> scratch;
    for (std::int64_t j = lo; j < hi; ++j)
      scores[j] = score_rows(table, hypotheses[j].theta, hypotheses[j].alpha,
                             n_eps, scratch);
  });

  int best = 0;
  for (int j = 1; j < m; ++j)
    if (scores[j] < scores[best]) best = j;  // ties keep the lower index

  ScoredHypothesis winner;
  winner.hypothesis = hypotheses[best];
  winner.score = scores[best];
  std::vector<double> dist(table.size());
  std::vector<int> chan(table.size());
  table.distances(winner.hypothesis.theta, winner.hypothesis.alpha, dist, chan);
  winner.sorted_records.resize(table.size());
  for (int i = 0; i < table.size(); ++i)
    winner.sorted_records[i] = {table.original_index(i), dist[i], chan[i]};
  std::sort(winner.sorted_records.begin(), winner.sorted_records.end(),
            [](const DistanceRecord& a, const DistanceRecord& b) {
              if (a.distance != b.distance) return a.distance < b.distance;
              return a.point_index < b.point_index;
            });
  return winner;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace {

std::vector<Hypothesis> sample_impl(const CarrierTable& table,
                                    std::span<const int> candidate_rows,
                                    int count, std::uint64_t seed,
                                    RejectionCounters* counters, int threads) {
  const ModelSpec& spec = table.spec();
  const int pool =
      candidate_rows.empty() ? table.size() : static_cast<int>(candidate_rows.size());
  if (pool < spec.elemental_size)
    throw SamplingFailureError("not enough points for an elemental subset");
  if (count < 1) throw InvalidInputError("hypothesis count must be positive");

  std::vector<Hypothesis> out(count);
  std::vector<std::int64_t> rank_rej(count, 0), cons_rej(count, 0);
  std::atomic<bool> failed{false};

  parallel_for(0, count, threads, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<int> rows(spec.elemental_size);
    for (std::int64_t j = lo; j < hi; ++j) {
      Rng rng(substream(seed, {static_cast<std::uint64_t>(j)}));
      bool accepted = false;
      for (int attempt = 0; attempt < kResampleBudget; ++attempt) {
        const std::vector<int> pick = rng.sample_distinct(pool, spec.elemental_size);
        for (int k = 0; k < spec.elemental_size; ++k)
          rows[k] = candidate_rows.empty() ? pick[k] : candidate_rows[pick[k]];
        ElementalResult res = solve_elemental(spec, table.stack_rows(rows));
        if (!res.hypothesis) {
          (res.failure == SolveFailure::RankDeficient ? rank_rej[j] : cons_rej[j])++;
          continue;
        }
        Hypothesis& h = out[j];
        h = std::move(*res.hypothesis);
        h.index = static_cast<int>(j);
        h.subset.resize(spec.elemental_size);
        for (int k = 0; k < spec.elemental_size; ++k)
          h.subset[k] = table.original_index(rows[k]);
        accepted = true;
        break;
      }
      if (!accepted) failed.store(true, std::memory_order_relaxed);
    }
  });

  std::int64_t total_rank = 0, total_cons = 0;
  for (int j = 0; j < count; ++j) {
    total_rank += rank_rej[j];
    total_cons += cons_rej[j];
  }
  if (counters) {
    counters->rank_deficient += total_rank;
    counters->constraint += total_cons;
  }
  if (failed.load()) {
    if (counters) counters->budget_exhausted++;
    const char* dominant =
        total_cons > total_rank ? "constraint violations" : "rank-deficient subsets";
    throw SamplingFailureError(
        std::string("elemental-subset resampling budget exhausted; dominant "
                    "rejection reason: ") +
        dominant);
  }
  return out;
}

}  // namespace

std::vector<Hypothesis> sample_hypotheses(const CarrierTable& table, int count,
                                          std::uint64_t seed,
                                          RejectionCounters* counters,
                                          int threads) {
  return sample_impl(table, {}, count, seed, counters, threads);
}

std::vector<Hypothesis> sample_hypotheses_from(const CarrierTable& table,
                                               std::span<const int> candidate_rows,
                                               int count, std::uint64_t seed,
                                               RejectionCounters* counters,
                                               int threads) {
  return sample_impl(table, candidate_rows, count, seed, counters, threads);
}

}  // namespace misre
