#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qsat/learners/ensembles.hpp"
#include "qsat/parallel.hpp"
#include "test_support.hpp"

namespace qsat {
namespace {

using testing::random_matrix;
using testing::random_vector;

double mse(const std::vector<double>& a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<double> nonlinear_target(const Matrix& x, std::uint64_t seed) {
  auto noise = random_vector(x.rows(), seed, -0.1, 0.1);
  std::vector<double> y(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    y[r] = std::sin(3.0 * x(r, 0)) + x(r, 1) * x(r, 2) + noise[r];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Random forest

TEST(RandomForest, DegenerateForestEqualsDecisionTree) {
  const auto x = random_matrix(70, 4, 1);
  const auto y = nonlinear_target(x, 2);
  RandomForestParams rf;
  rf.n_estimators = 1;
  rf.bootstrap = false;
  rf.max_features = MaxFeatures::All;
  DecisionTreeParams dt;
  dt.max_features = MaxFeatures::All;
  const auto forest = fit_random_forest(x, y, rf, 3);
  const auto tree = fit_decision_tree(x, y, dt, 4);
  const auto q = random_matrix(40, 4, 5);
  EXPECT_EQ(forest.predict(q), tree.predict(q));
}

TEST(RandomForest, ConstantTargetPredictsConstant) {
  const auto x = random_matrix(30, 3, 6);
  RandomForestParams rf;
  rf.n_estimators = 25;
  const auto forest = fit_random_forest(x, std::vector<double>(30, 2.5), rf, 7);
  for (double v : forest.predict(random_matrix(20, 3, 8))) EXPECT_EQ(v, 2.5);
}

TEST(RandomForest, ThreadCountDoesNotChangePredictions) {
  const auto x = random_matrix(120, 6, 9);
  const auto y = nonlinear_target(x, 10);
  RandomForestParams rf;
  rf.n_estimators = 200;
  const auto q = random_matrix(50, 6, 11);
  set_thread_count(1);
  const auto serial = fit_random_forest(x, y, rf, 42).predict(q);
  set_thread_count(8);
  const auto parallel = fit_random_forest(x, y, rf, 42).predict(q);
  set_thread_count(0);
  EXPECT_EQ(serial, parallel);
}

TEST(RandomForest, StateRoundTrip) {
  const auto x = random_matrix(40, 3, 12);
  const auto y = nonlinear_target(x, 13);
  RandomForestParams rf;
  rf.n_estimators = 10;
  const auto forest = fit_random_forest(x, y, rf, 1);
  const auto back = RandomForestModel::from_state(forest.hyperparams(), forest.state());
  EXPECT_EQ(back.predict(x), forest.predict(x));
}

// ---------------------------------------------------------------------------
// Gradient boosting

TEST(GradientBoosting, StageZeroIsMean) {
  const auto x = random_matrix(25, 3, 14);
  const auto y = random_vector(25, 15);
  GradientBoostingParams p;
  p.n_estimators = 10;
  const auto model = fit_gradient_boosting(x, y, p, 1);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  EXPECT_EQ(model.ensemble().base(), mean);
  for (double v : model.predict_stages(x, 0)) EXPECT_EQ(v, mean);
}

TEST(GradientBoosting, OneFullStepZeroesTwoPointResiduals) {
  const Matrix x(2, 1, {0.0, 1.0});
  const std::vector<double> y = {0.0, 4.0};
  GradientBoostingParams p;
  p.n_estimators = 1;
  p.learning_rate = 1.0;
  p.subsample = 1.0;
  p.max_depth = 1;
  const auto pred = fit_gradient_boosting(x, y, p, 0).predict(x);
  EXPECT_EQ(pred[0], 0.0);
  EXPECT_EQ(pred[1], 4.0);
}

TEST(GradientBoosting, TrainingMseNonIncreasingWithoutSubsampling) {
  const auto x = random_matrix(150, 5, 16);
  const auto y = nonlinear_target(x, 17);
  GradientBoostingParams p;
  p.n_estimators = 200;
  p.subsample = 1.0;
  p.max_depth = 3;
  const auto model = fit_gradient_boosting(x, y, p, 2);
  double previous = mse(model.predict_stages(x, 0), y);
  for (std::size_t m = 1; m <= 200; ++m) {
    const double current = mse(model.predict_stages(x, m), y);
    EXPECT_LE(current, previous + 1e-12) << "stage " << m;
    previous = current;
  }
}

TEST(GradientBoosting, SubsampleIsSeeded) {
  const auto x = random_matrix(60, 3, 18);
  const auto y = nonlinear_target(x, 19);
  GradientBoostingParams p;
  p.n_estimators = 30;
  EXPECT_EQ(fit_gradient_boosting(x, y, p, 4).predict(x), fit_gradient_boosting(x, y, p, 4).predict(x));
  EXPECT_NE(fit_gradient_boosting(x, y, p, 4).predict(x), fit_gradient_boosting(x, y, p, 5).predict(x));
}

// ---------------------------------------------------------------------------
// Regularized boosting

TEST(RegularizedBoosting, NoRegularizationMatchesGradientBoosting) {
  const auto x = random_matrix(120, 5, 20);
  const auto y = nonlinear_target(x, 21);
  for (double subsample : {1.0, 0.8}) {
    GradientBoostingParams gb;
    gb.n_estimators = 80;
    gb.subsample = subsample;
    gb.max_depth = 4;
    RegularizedBoostingParams rb;
    rb.n_estimators = 80;
    rb.subsample = subsample;
    rb.max_depth = 4;
    rb.reg_lambda = 0.0;
    rb.reg_alpha = 0.0;
    rb.colsample_bytree = 1.0;
    const auto a = fit_gradient_boosting(x, y, gb, 3).predict(x);
    const auto b = fit_regularized_boosting(x, y, rb, 3).predict(x);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i], b[i], 1e-10) << "subsample " << subsample;
    }
  }
}

TEST(RegularizedBoosting, BalancedGradientsGiveZeroLeaf) {
  const Matrix x(2, 1, {0.0, 1.0});
  const std::vector<double> y = {0.0, 4.0};
  RegularizedBoostingParams p;
  p.n_estimators = 1;
  p.subsample = 1.0;
  p.reg_lambda = 1.5;
  p.min_samples_split = 10;  // root stays a leaf
  const auto model = fit_regularized_boosting(x, y, p, 0);
  EXPECT_EQ(model.ensemble().base(), 2.0);
  ASSERT_EQ(model.ensemble().trees().size(), 1u);
  EXPECT_EQ(model.ensemble().trees()[0].nodes().size(), 1u);
  EXPECT_EQ(model.ensemble().trees()[0].nodes()[0].value, 0.0);
}

TEST(RegularizedBoosting, HugeL1PenaltyPredictsBase) {
  const auto x = random_matrix(50, 3, 22);
  const auto y = nonlinear_target(x, 23);
  RegularizedBoostingParams p;
  p.n_estimators = 20;
  p.reg_alpha = 1e12;
  const auto model = fit_regularized_boosting(x, y, p, 1);
  for (const auto& tree : model.ensemble().trees()) {
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) EXPECT_EQ(node.value, 0.0);
    }
  }
  for (double v : model.predict(x)) EXPECT_EQ(v, model.ensemble().base());
}

// ---------------------------------------------------------------------------
// AdaBoost.R2

TEST(AdaBoost, PerfectFirstRoundStopsEarly) {
  const Matrix x(4, 1, {0.0, 1.0, 2.0, 3.0});
  const std::vector<double> y = {5.0, 5.0, 5.0, 5.0};
  AdaBoostParams p;
  p.n_estimators = 10;
  AdaBoostTrace trace;
  const auto model = fit_adaboost_r2(x, y, p, 0, &trace);
  EXPECT_EQ(model.trees().size(), 1u);
  EXPECT_EQ(trace.rounds.size(), 1u);
  EXPECT_EQ(model.predict(x), y);
}

TEST(AdaBoost, SingleEstimatorEqualsItsTree) {
  const auto x = random_matrix(30, 2, 24);
  const auto y = random_vector(30, 25);
  AdaBoostParams p;
  p.n_estimators = 1;
  const auto model = fit_adaboost_r2(x, y, p, 3);
  ASSERT_EQ(model.trees().size(), 1u);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    EXPECT_EQ(model.predict_one(x.row(r)), model.trees()[0].predict_row(x.row(r)));
  }
}

TEST(AdaBoost, TwoRoundHandTrace) {
  const Matrix x(3, 1, {0.0, 1.0, 2.0});
  const std::vector<double> y = {0.0, 1.0, 3.0};
  AdaBoostParams p;
  p.n_estimators = 2;
  p.max_depth = 1;
  p.learning_rate = 1.0;
  p.loss = AdaLoss::Linear;
  AdaBoostTrace trace;
  const auto model = fit_adaboost_r2(x, y, p, 11, &trace);
  ASSERT_EQ(model.trees().size(), trace.rounds.size());

  std::vector<double> w(3, 1.0 / 3.0);
  for (std::size_t m = 0; m < trace.rounds.size(); ++m) {
    const auto& round = trace.rounds[m];
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(round.sample_weights[i], w[i], 1e-15);
    std::vector<double> err(3);
    for (std::size_t i = 0; i < 3; ++i) {
      err[i] = std::abs(model.trees()[m].predict_row(x.row(i)) - y[i]);
    }
    const double emax = *std::max_element(err.begin(), err.end());
    if (emax == 0.0) break;
    double lbar = 0.0;
    std::vector<double> loss(3);
    for (std::size_t i = 0; i < 3; ++i) {
      loss[i] = err[i] / emax;
      lbar += w[i] * loss[i];
      EXPECT_NEAR(round.losses[i], loss[i], 1e-15);
    }
    EXPECT_NEAR(round.average_loss, lbar, 1e-15);
    if (lbar >= 0.5) break;
    const double beta = lbar / (1.0 - lbar);
    EXPECT_NEAR(round.beta, beta, 1e-15);
    EXPECT_NEAR(round.estimator_weight, std::log(1.0 / beta), 1e-14);
    EXPECT_NEAR(model.estimator_weights()[m], std::log(1.0 / beta), 1e-14);
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      w[i] *= std::pow(beta, 1.0 - loss[i]);
      total += w[i];
    }
    for (auto& v : w) v /= total;
  }
}

TEST(AdaBoost, PredictionIsWeightedMedianOfMembers) {
  const auto x = random_matrix(80, 3, 26);
  const auto y = nonlinear_target(x, 27);
  AdaBoostParams p;
  p.n_estimators = 15;
  const auto model = fit_adaboost_r2(x, y, p, 6);
  const auto q = random_matrix(20, 3, 28);
  for (std::size_t r = 0; r < q.rows(); ++r) {
    std::vector<std::pair<double, double>> members;
    double total = 0.0;
    for (std::size_t m = 0; m < model.trees().size(); ++m) {
      members.emplace_back(model.trees()[m].predict_row(q.row(r)), model.estimator_weights()[m]);
      total += model.estimator_weights()[m];
    }
    std::stable_sort(members.begin(), members.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    double cum = 0.0, expected = members.back().first;
    for (const auto& [value, weight] : members) {
      cum += weight;
      if (cum >= 0.5 * total) {
        expected = value;
        break;
      }
    }
    EXPECT_EQ(model.predict_one(q.row(r)), expected);
  }
}

TEST(WeightedMedian, HandCases) {
  EXPECT_EQ(weighted_median(std::vector<double>{3.0}, std::vector<double>{1.0}), 3.0);
  EXPECT_EQ(weighted_median(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{1, 1, 1}), 2.0);
  EXPECT_EQ(weighted_median(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{5, 1, 1}), 1.0);
}

TEST(AdaBoost, StateRoundTrip) {
  const auto x = random_matrix(40, 2, 29);
  const auto y = random_vector(40, 30);
  AdaBoostParams p;
  p.n_estimators = 8;
  const auto model = fit_adaboost_r2(x, y, p, 2);
  const auto back = AdaBoostModel::from_state(model.hyperparams(), model.state());
  EXPECT_EQ(back.predict(x), model.predict(x));
}

}  // namespace
}  // namespace qsat
