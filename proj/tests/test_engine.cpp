#include "misre/engine.hpp"
#include "misre/models.hpp"
#include "misre/rng.hpp"
#include "misre/synth.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace misre;
using namespace misre::testing;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Hypothesis make_hypothesis(Eigen::VectorXd theta, double alpha, int index = 0) {
  Hypothesis h;
  h.theta = std::move(theta);
  h.alpha = alpha;
  h.index = index;
  return h;
}

/// Full-sort scoring oracle.
double score_oracle(const CarrierTable& table, const Hypothesis& h, int n_eps) {
  std::vector<double> d(table.size());
  table.distances(h.theta, h.alpha, d);
  std::sort(d.begin(), d.end());
  return std::accumulate(d.begin(), d.begin() + n_eps, 0.0);
}

}  // namespace

TEST_CASE("mahalanobis: line distance is the residual with unit variance") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  const CarrierSet set = lift(spec, InputPoint(vec({5, 2})));
  CHECK(mahalanobis(set, make_hypothesis(vec({0, 1}), 0)).distance ==
        doctest::Approx(2.0).epsilon(1e-12));
  const CarrierSet on_locus = lift(spec, InputPoint(vec({7, 0})));
  CHECK(mahalanobis(on_locus, make_hypothesis(vec({0, 1}), 0)).distance ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mahalanobis: circle carrier case worked by hand") {
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  const CarrierSet set = lift(spec, InputPoint(vec({2, 0})));
  const double s = 1.0 / std::sqrt(2.0);
  const Hypothesis h = make_hypothesis(vec({0, 0, s, 0, s}), s);
  CHECK(mahalanobis(set, h).distance == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("mahalanobis: vanishing projected variance") {
  CarrierSet set;
  CarrierChannel ch;
  ch.x = vec({1, 0});
  ch.jac = Eigen::MatrixXd::Zero(2, 2);
  ch.cov = Eigen::MatrixXd::Zero(2, 2);
  set.channels.push_back(ch);
  CHECK(std::isinf(mahalanobis(set, make_hypothesis(vec({1, 0}), 0)).distance));
  set.channels[0].x = vec({0, 0});
  CHECK(mahalanobis(set, make_hypothesis(vec({1, 0}), 0)).distance == 0.0);
}

TEST_CASE("homography distance keeps the worse channel") {
  const ModelSpec& spec = spec_for(ModelId::Homography);
  // identity homography; correspondence off in y' only hits channel 2
  const CarrierSet set = lift(spec, InputPoint(vec({0.3, -0.4, 0.3, -0.1})));
  Eigen::VectorXd theta(9);
  theta << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  theta.normalize();
  const DistanceRecord rec = mahalanobis(set, make_hypothesis(theta, 0));
  CHECK(rec.channel == 1);
  CHECK(rec.distance > 0.1);
}

TEST_CASE("score_hypothesis sums the smallest distances") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  std::vector<Eigen::VectorXd> pts = {vec({0, 0}), vec({1, 1}), vec({2, 9})};
  const CarrierTable table(spec, pts);
  const Hypothesis h = make_hypothesis(vec({0, 1}), 0);
  CHECK(score_hypothesis(table, h, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(score_hypothesis(table, h, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("score matches the full-sort oracle on random data") {
  Rng rng(3);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 50; ++i)
    pts.push_back(vec({rng.uniform(-3, 3), rng.uniform(-3, 3)}));
  const CarrierTable table(spec_for(ModelId::Line2d), pts);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd theta = vec({rng.normal(), rng.normal()}).normalized();
    const Hypothesis h = make_hypothesis(theta, rng.uniform(-2, 2));
    for (int n_eps : {1, 5, 17, 50})
      CHECK(score_hypothesis(table, h, n_eps) ==
            doctest::Approx(score_oracle(table, h, n_eps)).epsilon(1e-12));
  }
}

TEST_CASE("select_best: single hypothesis and tie break") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  std::vector<Eigen::VectorXd> pts = {vec({0, 0.1}), vec({1, -0.1}),
                                      vec({2, 0.05}), vec({3, -0.02})};
  const CarrierTable table(spec, pts);
  std::vector<Hypothesis> hyps = {make_hypothesis(vec({0, 1}), 0, 0)};
  const ScoredHypothesis only = select_best(table, hyps, 2, 1);
  CHECK(only.hypothesis.index == 0);
  CHECK(only.sorted_records.size() == 4);
  CHECK(std::is_sorted(only.sorted_records.begin(), only.sorted_records.end(),
                       [](const DistanceRecord& a, const DistanceRecord& b) {
                         return a.distance < b.distance;
                       }));
  // equal scores resolve to the lower hypothesis index
  hyps.push_back(make_hypothesis(vec({0, 1}), 0, 1));
  CHECK(select_best(table, hyps, 2, 1).hypothesis.index == 0);

  // winner score equals the sum of the first entries of its sequence
  double head = only.sorted_records[0].distance + only.sorted_records[1].distance;
  CHECK(only.score == doctest::Approx(head).epsilon(1e-9));
}

TEST_CASE("select_best equals an exhaustive full-sort selection") {
  Rng rng(8);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 200; ++i)
    pts.push_back(vec({rng.uniform(-5, 5), rng.uniform(-5, 5)}));
  const CarrierTable table(spec_for(ModelId::Line2d), pts);
  std::vector<Hypothesis> hyps;
  for (int j = 0; j < 50; ++j) {
    Eigen::VectorXd theta = vec({rng.normal(), rng.normal()}).normalized();
    hyps.push_back(make_hypothesis(theta, rng.uniform(-3, 3), j));
  }
  const int n_eps = 17;
  int best = 0;
  double best_score = score_oracle(table, hyps[0], n_eps);
  for (int j = 1; j < 50; ++j) {
    const double s = score_oracle(table, hyps[j], n_eps);
    if (s < best_score) {
      best_score = s;
      best = j;
    }
  }
  const ScoredHypothesis winner = select_best(table, hyps, n_eps, 2);
  CHECK(winner.hypothesis.index == best);
  CHECK(winner.score == doctest::Approx(best_score).epsilon(1e-12));
}

TEST_CASE("select_best on an empty batch is a sampling failure") {
  std::vector<Eigen::VectorXd> pts = {vec({0, 0}), vec({1, 0})};
  const CarrierTable table(spec_for(ModelId::Line2d), pts);
  CHECK_THROWS_AS(select_best(table, {}, 1, 1), SamplingFailureError);
}

TEST_CASE("sample_hypotheses: deterministic and uses the full set when n = m_e") {
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  std::vector<Eigen::VectorXd> pts = {vec({0, 0}), vec({1, 0.5})};
  const CarrierTable table(spec, pts);
  const auto a = sample_hypotheses(table, 5, 77);
  const auto b = sample_hypotheses(table, 5, 77);
  REQUIRE(a.size() == 5);
  for (int j = 0; j < 5; ++j) {
    CHECK(a[j].theta.isApprox(b[j].theta, 0.0));
    CHECK(a[j].alpha == b[j].alpha);
    CHECK(a[j].subset == std::vector<int>{0, 1});
  }
}

TEST_CASE("sample_hypotheses: worker count does not change the stream") {
  Rng rng(14);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 120; ++i)
    pts.push_back(vec({rng.uniform(0, 10), rng.uniform(0, 10)}));
  const CarrierTable table(spec_for(ModelId::Line2d), pts);
  const auto one = sample_hypotheses(table, 64, 5, nullptr, 1);
  const auto eight = sample_hypotheses(table, 64, 5, nullptr, 8);
  REQUIRE(one.size() == eight.size());
  for (size_t j = 0; j < one.size(); ++j) {
    CHECK(one[j].subset == eight[j].subset);
    CHECK(one[j].theta == eight[j].theta);
  }
  const auto w1 = select_best(table, one, 10, 1);
  const auto w8 = select_best(table, eight, 10, 8);
  CHECK(w1.hypothesis.index == w8.hypothesis.index);
  CHECK(w1.score == w8.score);
}

TEST_CASE("sampling failure names the dominant rejection reason") {
  // all points coincide: every subset is rank-deficient
  std::vector<Eigen::VectorXd> pts(6, vec({1, 2}));
  const CarrierTable table(spec_for(ModelId::Line2d), pts);
  RejectionCounters counters;
  CHECK_THROWS_WITH_AS(sample_hypotheses(table, 3, 1, &counters),
                       doctest::Contains("rank-deficient"),
                       SamplingFailureError);
  CHECK(counters.rank_deficient > 0);
}

TEST_CASE("initial_set_size honors both rules") {
  CHECK(initial_set_size(spec_for(ModelId::Line2d), 600, 5.0) == 30);
  CHECK(initial_set_size(spec_for(ModelId::Line2d), 1350, 5.0) == 68);
  // floor of five elemental subsets dominates on small inputs
  CHECK(initial_set_size(spec_for(ModelId::Ellipse2d), 100, 5.0) == 25);
  CHECK(initial_set_size(spec_for(ModelId::Line2d), 100, 5.0) == 10);
}

TEST_CASE("two-ellipse winner concentrates on one structure") {
  const ScenarioSpec scenario = preset_scenario("two-ellipses-fig3");
  const ModelSpec& spec = spec_for(ModelId::Ellipse2d);
  int good_seeds = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const LabeledDataset data = generate(scenario, seed);
    auto [norm, tf] = normalize_points(spec, data.points);
    const CarrierTable table(spec, norm);
    const auto hyps = sample_hypotheses(table, 200, seed * 31 + 7, nullptr, 2);
    const int n_eps = initial_set_size(spec, table.size(), 5.0);
    const ScoredHypothesis winner = select_best(table, hyps, n_eps, 2);
    int counts[2] = {0, 0};
    for (int k = 0; k < n_eps; ++k) {
      const int lab = data.labels[winner.sorted_records[k].point_index];
      if (lab >= 0) counts[lab]++;
    }
    const double purity =
        static_cast<double>(std::max(counts[0], counts[1])) / n_eps;
    if (purity >= 0.9) ++good_seeds;
  }
  CHECK(good_seeds >= 4);
}

TEST_CASE("scale equivariance for linear models") {
  Rng rng(6);
  std::vector<Eigen::VectorXd> pts, scaled;
  for (int i = 0; i < 150; ++i) {
    const Eigen::VectorXd p = vec({rng.uniform(-4, 4), rng.uniform(-4, 4)});
    pts.push_back(p);
    scaled.push_back(4.0 * p);  // power of two scales exactly
  }
  const ModelSpec& spec = spec_for(ModelId::Line2d);
  const CarrierTable base(spec, pts);
  const CarrierTable big(spec, scaled);
  const auto h1 = sample_hypotheses(base, 40, 123);
  const auto h2 = sample_hypotheses(big, 40, 123);
  const int n_eps = 12;
  const auto w1 = select_best(base, h1, n_eps, 1);
  const auto w2 = select_best(big, h2, n_eps, 1);
  CHECK(w1.hypothesis.index == w2.hypothesis.index);
  CHECK(w1.hypothesis.subset == w2.hypothesis.subset);
  REQUIRE(w1.sorted_records.size() == w2.sorted_records.size());
  for (size_t i = 0; i < w1.sorted_records.size(); ++i) {
    CHECK(w1.sorted_records[i].point_index == w2.sorted_records[i].point_index);
    CHECK(w2.sorted_records[i].distance ==
          doctest::Approx(4.0 * w1.sorted_records[i].distance).epsilon(1e-12));
  }
}
