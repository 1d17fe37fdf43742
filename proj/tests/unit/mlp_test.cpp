#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "qsat/data_model.hpp"
#include "qsat/learners/mlp.hpp"
#include "qsat/preprocess.hpp"
#include "test_support.hpp"

namespace qsat {
namespace {

using testing::random_matrix;
using testing::random_vector;

TEST(Mlp, ZeroWeightsOutputTheBias) {
  MlpWeights w(4, 6);
  w.b2 = 1.75;
  for (std::size_t r = 0; r < 10; ++r) EXPECT_EQ(w.forward(random_vector(4, r)), 1.75);
}

TEST(Mlp, FlattenAssignRoundTrip) {
  const auto w = init_mlp_weights(5, 7, 3);
  MlpWeights back(5, 7);
  back.assign(w.flatten());
  EXPECT_EQ(back.flatten(), w.flatten());
  EXPECT_EQ(w.parameter_count(), 5u * 7u + 7u + 7u + 1u);
}

TEST(Mlp, InitWithinGlorotBound) {
  const auto w = init_mlp_weights(15, 30, 9);
  const double bound1 = std::sqrt(2.0 / (15.0 + 30.0));
  for (double v : w.w1) EXPECT_LE(std::abs(v), bound1);
  const double bound2 = std::sqrt(2.0 / (30.0 + 1.0));
  for (double v : w.w2) EXPECT_LE(std::abs(v), bound2);
}

TEST(Mlp, AnalyticGradientMatchesFiniteDifferences) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 12; ++trial) {
    const auto x = random_matrix(20, 6, 100 + trial, -2.0, 2.0);
    const auto y = random_vector(20, 200 + trial, -1.0, 3.0);
    auto w = init_mlp_weights(6, 8, trial);
    // Larger random weights exercise the sigmoid away from its linear part.
    auto theta = w.flatten();
    const auto bump = random_vector(theta.size(), 300 + trial, -1.0, 1.0);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += bump[i];
    w.assign(theta);
    const double alpha = 0.01 * static_cast<double>(trial);
    const auto analytic = mlp_loss_gradient(w, x, y, alpha).gradient;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      MlpWeights wp(6, 8), wm(6, 8);
      wp.assign(plus);
      wm.assign(minus);
      const double numeric = (mlp_loss_gradient(wp, x, y, alpha).value -
                              mlp_loss_gradient(wm, x, y, alpha).value) /
                             (2.0 * h);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, LossValueDefinition) {
  MlpWeights w(1, 1);
  w.w1 = {2.0};
  w.w2 = {3.0};
  w.b2 = 0.5;
  const Matrix x(2, 1, {0.0, 0.0});
  const std::vector<double> y = {0.0, 1.0};
  // Output 3 * 0.5 + 0.5 = 2; errors 2 and 1.
  const double expected = 0.5 * (4.0 + 1.0) / 2.0 + 0.1 / (2.0 * 2.0) * (4.0 + 9.0);
  EXPECT_NEAR(mlp_loss_gradient(w, x, y, 0.1).value, expected, 1e-15);
}

TEST(Mlp, TrainingLossDecreasesOnSyntheticCorpus) {
  const auto ds = synthesize_dataset(default_generator_config());
  const auto fit = fit_pipeline(ds);
  const auto t = fit.pipeline.transform(fit.trimmed);
  MlpParams p;
  p.early_stopping = false;
  p.max_iter = 300;
  MlpTrace trace;
  fit_mlp(t.x, *t.y_log, p, 42, &trace);
  ASSERT_GT(trace.loss_curve.size(), 200u);
  EXPECT_LT(trace.loss_curve[200], trace.loss_curve[0]);
}

TEST(Mlp, EarlyStoppingRestoresBestValidationWeights) {
  const auto x = random_matrix(120, 4, 7);
  const auto y = random_vector(120, 8);
  MlpParams p;
  p.max_iter = 3000;
  MlpTrace trace;
  const auto model = fit_mlp(x, y, p, 5, &trace);
  ASSERT_FALSE(trace.validation_curve.empty());
  ASSERT_GE(trace.best_iteration, 0);
  ASSERT_LT(static_cast<std::size_t>(trace.best_iteration), trace.validation_curve.size());
  const auto best = std::min_element(trace.validation_curve.begin(), trace.validation_curve.end());
  EXPECT_LE(trace.validation_curve[static_cast<std::size_t>(trace.best_iteration)], *best + p.tol);
  EXPECT_LT(trace.loss_curve.size(), 3000u);
  EXPECT_EQ(model.feature_count(), 4u);
}

TEST(Mlp, SeededFitIsDeterministic) {
  const auto x = random_matrix(60, 3, 10);
  const auto y = random_vector(60, 11);
  MlpParams p;
  p.max_iter = 100;
  EXPECT_EQ(fit_mlp(x, y, p, 3).predict(x), fit_mlp(x, y, p, 3).predict(x));
}

TEST(Mlp, StateRoundTrip) {
  const auto x = random_matrix(40, 3, 12);
  const auto y = random_vector(40, 13);
  MlpParams p;
  p.max_iter = 50;
  const auto model = fit_mlp(x, y, p, 1);
  const auto back = MlpModel::from_state(model.hyperparams(), model.state());
  EXPECT_EQ(back.predict(x), model.predict(x));
}

}  // namespace
}  // namespace qsat
