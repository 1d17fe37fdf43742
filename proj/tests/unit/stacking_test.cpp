#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "qsat/data_model.hpp"
#include "qsat/ensemble.hpp"
#include "qsat/learners/factory.hpp"
#include "qsat/parallel.hpp"
#include "qsat/preprocess.hpp"
#include "test_support.hpp"

namespace qsat {
namespace {

using testing::ConstantRegressor;
using testing::FunctionRegressor;

BaseFitter mean_fitter() {
  return [](const Matrix& x, std::span<const double> y, std::uint64_t) -> RegressorPtr {
    double s = 0.0;
    for (double v : y) s += v;
    return std::make_shared<ConstantRegressor>(ModelKind::Ridge, s / static_cast<double>(y.size()),
                                               x.cols());
  };
}

/// Records which row ids (column 0 of x) every fitted model saw; each model
/// predicts its own registry id so OOF entries can be traced back to it.
class FitRecorder {
 public:
  BaseFitter fitter(std::size_t column) {
    return [this, column](const Matrix& x, std::span<const double>, std::uint64_t) -> RegressorPtr {
      std::set<std::size_t> seen;
      for (std::size_t r = 0; r < x.rows(); ++r) seen.insert(static_cast<std::size_t>(x(r, 0)));
      std::lock_guard lock(mutex_);
      const double id = static_cast<double>(fits_.size());
      fits_.push_back({column, std::move(seen)});
      return std::make_shared<ConstantRegressor>(ModelKind::Ridge, id, x.cols());
    };
  }

  struct Fit {
    std::size_t column;
    std::set<std::size_t> rows;
  };
  const std::vector<Fit>& fits() const { return fits_; }

 private:
  std::mutex mutex_;
  std::vector<Fit> fits_;
};

Matrix id_matrix(std::size_t n, std::uint64_t seed) {
  auto x = testing::random_matrix(n, 3, seed);
  for (std::size_t r = 0; r < n; ++r) x(r, 0) = static_cast<double>(r);
  return x;
}

TEST(OofMatrix, MeanStubEqualsMeanOfOtherFolds) {
  const std::size_t n = 23;
  const auto x = testing::random_matrix(n, 2, 1);
  const auto y = testing::random_vector(n, 2, 0.0, 10.0);
  const auto plan = kfold_split(n, 5, 7);
  const std::vector<BaseFitter> fitters = {mean_fitter()};
  const auto oof = build_oof_matrix(x, y, fitters, plan, 7);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (plan.assignment[r] != plan.assignment[i]) {
        s += y[r];
        ++c;
      }
    }
    EXPECT_NEAR(oof(i, 0), s / static_cast<double>(c), 1e-12) << "row " << i;
  }
}

TEST(OofMatrix, NoEntryComesFromAModelThatSawItsRow) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 10 + seed * 3;
    const auto x = id_matrix(n, seed);
    const auto y = testing::random_vector(n, seed + 100);
    FitRecorder rec;
    std::vector<BaseFitter> fitters;
    for (std::size_t j = 0; j < 5; ++j) fitters.push_back(rec.fitter(j));
    const auto plan = kfold_split(n, 5, seed);
    const auto oof = build_oof_matrix(x, y, fitters, plan, seed);
    ASSERT_EQ(oof.rows(), n);
    ASSERT_EQ(oof.cols(), 5u);
    ASSERT_EQ(rec.fits().size(), 25u);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        const auto& fit = rec.fits().at(static_cast<std::size_t>(oof(i, j)));
        EXPECT_EQ(fit.column, j);
        EXPECT_FALSE(fit.rows.contains(i)) << "seed " << seed << " row " << i;
        EXPECT_EQ(fit.rows.size(), n - plan.fold_sizes()[plan.assignment[i]]);
      }
    }
  }
}

TEST(OofMatrix, SameSeedSameMatrixAnyThreadCount) {
  const auto x = testing::random_matrix(60, 4, 3);
  const auto y = testing::random_vector(60, 4);
  std::vector<BaseFitter> fitters;
  for (auto kind : {ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::Knn}) {
    auto params = default_params(kind);
    if (kind == ModelKind::RandomForest) params["n_estimators"] = 20;
    if (kind == ModelKind::Knn) params["n_neighbors"] = 5;
    fitters.push_back([kind, params](const Matrix& xs, std::span<const double> ys,
                                     std::uint64_t s) { return fit_regressor(kind, xs, ys, params, s); });
  }
  const auto plan = kfold_split(60, 5, 9);
  set_thread_count(1);
  const auto serial = build_oof_matrix(x, y, fitters, plan, 9);
  set_thread_count(4);
  const auto threaded = build_oof_matrix(x, y, fitters, plan, 9);
  set_thread_count(0);
  const auto again = build_oof_matrix(x, y, fitters, plan, 9);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(serial(i, j), threaded(i, j));
      EXPECT_EQ(serial(i, j), again(i, j));
    }
  }
}

StackingConfig small_config(std::uint64_t seed = 5) {
  StackingConfig cfg;
  cfg.seed = seed;
  return cfg;
}

TEST(Stacking, PerfectColumnGetsUnitWeight) {
  const std::size_t n = 40;
  auto x = testing::random_matrix(n, 2, 11);
  const auto y = testing::random_vector(n, 12, 1.0, 4.0);
  for (std::size_t r = 0; r < n; ++r) x(r, 0) = y[r];
  const std::vector<BaseFitter> fitters = {
      [](const Matrix& xs, std::span<const double>, std::uint64_t) -> RegressorPtr {
        return std::make_shared<FunctionRegressor>(ModelKind::Ridge, xs.cols(),
                                                   [](std::span<const double> row) { return row[0]; });
      },
      mean_fitter()};
  const auto fit = fit_stacked(x, y, {"perfect", "mean"}, fitters, MetaKind::Linear, small_config());
  EXPECT_NEAR(fit.model.meta_fit().coef[0], 1.0, 1e-6);
  EXPECT_NEAR(fit.model.meta_fit().coef[1], 0.0, 1e-6);
  EXPECT_NEAR(fit.model.meta_fit().intercept, 0.0, 1e-6);
}

TEST(Stacking, DuplicatedColumnsMatchSingleColumnStack) {
  const auto x = testing::random_matrix(50, 3, 13);
  auto y = testing::random_vector(50, 14);
  for (std::size_t r = 0; r < 50; ++r) y[r] += 2.0 * x(r, 0) - x(r, 1);
  const BaseFitter ridge = [](const Matrix& xs, std::span<const double> ys, std::uint64_t s) {
    return fit_regressor(ModelKind::Ridge, xs, ys, {{"alpha", 1.0}}, s);
  };
  const std::vector<BaseFitter> one = {ridge}, two = {ridge, ridge};
  const auto single = fit_stacked(x, y, {"a"}, one, MetaKind::Linear, small_config());
  const auto doubled = fit_stacked(x, y, {"a", "b"}, two, MetaKind::Linear, small_config());
  const auto probe = testing::random_matrix(30, 3, 15);
  const auto p1 = single.model.predict(probe), p2 = doubled.model.predict(probe);
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_NEAR(p1[i], p2[i], 1e-8);
}

TEST(Stacking, SingleBaseIsAffineRecalibration) {
  const auto x = testing::random_matrix(40, 2, 16);
  const auto y = testing::random_vector(40, 17);
  const std::vector<BaseFitter> one = {[](const Matrix& xs, std::span<const double> ys,
                                          std::uint64_t s) {
    return fit_regressor(ModelKind::Ridge, xs, ys, {{"alpha", 1.0}}, s);
  }};
  const auto fit = fit_stacked(x, y, {"ridge"}, one, MetaKind::Linear, small_config());
  ASSERT_EQ(fit.model.meta_fit().coef.size(), 1u);
  const auto base = fit.model.bases()[0]->predict(x);
  const auto stacked = fit.model.predict(x);
  const double a = fit.model.meta_fit().coef[0], b = fit.model.meta_fit().intercept;
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(stacked[i], a * base[i] + b, 1e-12);
}

TEST(Stacking, ProjectionAndConstantMeta) {
  auto b0 = std::make_shared<ConstantRegressor>(ModelKind::Knn, 3.0, 2);
  auto b1 = std::make_shared<ConstantRegressor>(ModelKind::DecisionTree, 5.0, 2);
  LinearFit projection;
  projection.coef = {1.0, 0.0};
  const StackedModel proj({"knn", "decision_tree"}, {b0, b1}, MetaKind::Linear, projection, 5, 0);
  EXPECT_EQ(proj.predict_one(std::vector<double>{0.1, 0.2}), 3.0);

  LinearFit constant;
  constant.coef = {0.0, 0.0};
  constant.intercept = 2.5;
  const StackedModel cons({"knn", "decision_tree"}, {b0, b1}, MetaKind::Linear, constant, 5, 0);
  for (double p : cons.predict(testing::random_matrix(4, 2, 1))) EXPECT_EQ(p, 2.5);
}

TEST(Stacking, RejectsDuplicateBaseNamesAndWidthMismatch) {
  auto b = std::make_shared<ConstantRegressor>(ModelKind::Knn, 1.0, 2);
  LinearFit two;
  two.coef = {1.0, 1.0};
  EXPECT_THROW(StackedModel({"knn", "knn"}, {b, b}, MetaKind::Linear, two, 5, 0), Error);
  LinearFit three;
  three.coef = {1.0, 1.0, 1.0};
  EXPECT_THROW(StackedModel({"knn", "dt"}, {b, b}, MetaKind::Linear, three, 5, 0), Error);
  LinearFit one;
  one.coef = {1.0};
  const StackedModel ok({"knn"}, {b}, MetaKind::Linear, one, 5, 0);
  EXPECT_THROW(ok.predict(testing::random_matrix(2, 3, 1)), Error);
}

TEST(Stacking, SyntheticCorpusStackNotFarBelowBestBase) {
  auto gen = default_generator_config();
  gen.per_design = 80;
  const auto fit = fit_pipeline(synthesize_dataset(gen));
  const auto t = fit.pipeline.transform(fit.trimmed);
  const auto& y = *t.y_log;
  const auto stack = fit_stacked(t.x, y, small_config(42));
  ASSERT_EQ(stack.oof.cols(), 5u);
  double best_oof = -1e300;
  for (std::size_t j = 0; j < stack.oof.cols(); ++j) {
    best_oof = std::max(best_oof, compute_metrics(y, stack.oof.column(j)).r2);
  }
  const double stacked_r2 = compute_metrics(y, stack.model.predict(t.x)).r2;
  EXPECT_GE(stacked_r2, best_oof - 0.05);

  const auto back = StackedModel::from_json(stack.model.to_json());
  EXPECT_EQ(back.predict(t.x), stack.model.predict(t.x));
}

TEST(Stacking, ElasticNetMetaFits) {
  const auto x = testing::random_matrix(40, 2, 18);
  const auto y = testing::random_vector(40, 19);
  const std::vector<BaseFitter> two = {mean_fitter(), [](const Matrix& xs, std::span<const double> ys,
                                                         std::uint64_t s) {
                                         return fit_regressor(ModelKind::Ridge, xs, ys, {}, s);
                                       }};
  const auto fit = fit_stacked(x, y, {"mean", "ridge"}, two, MetaKind::ElasticNet, small_config());
  EXPECT_EQ(fit.model.meta(), MetaKind::ElasticNet);
  EXPECT_EQ(fit.model.meta_fit().coef.size(), 2u);
}

std::map<ModelKind, double> nine(double value) {
  std::map<ModelKind, double> m;
  for (auto k : kCoreKinds) m[k] = value;
  return m;
}

TEST(EnsembleAverage, ConstantMean) { EXPECT_EQ(ensemble_average(nine(20.0)), 20.0); }

TEST(EnsembleAverage, MixedValues) {
  auto m = nine(20.0);
  for (std::size_t i = 0; i < 4; ++i) m[kCoreKinds[i]] = 10.0;
  EXPECT_NEAR(ensemble_average(m), 140.0 / 9.0, 1e-12);
}

TEST(EnsembleAverage, OrderInvariantAndBounded) {
  const auto v = testing::random_vector(9, 21, 5.0, 50.0);
  std::vector<std::size_t> perm = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::map<ModelKind, double> first;
  for (std::size_t i = 0; i < 9; ++i) first[kCoreKinds[i]] = v[i];
  const double ref = ensemble_average(first);
  EXPECT_GE(ref, *std::min_element(v.begin(), v.end()));
  EXPECT_LE(ref, *std::max_element(v.begin(), v.end()));
  std::mt19937_64 rng(22);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::map<ModelKind, double> m;
    for (std::size_t i = 0; i < 9; ++i) m[kCoreKinds[perm[i]]] = v[perm[i]];
    EXPECT_EQ(ensemble_average(m), ref);
  }
}

TEST(EnsembleAverage, MissingKindIsReported) {
  auto m = nine(20.0);
  m.erase(ModelKind::Ridge);
  try {
    ensemble_average(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingModel);
    EXPECT_EQ(e.field(), "ridge");
  }
}

TEST(EnsembleAverage, LogPredictionIsLogOfRawMean) {
  std::map<ModelKind, RegressorPtr> models;
  for (std::size_t i = 0; i < 9; ++i) {
    models[kCoreKinds[i]] =
        std::make_shared<ConstantRegressor>(kCoreKinds[i], std::log(i < 4 ? 10.0 : 20.0), 2);
  }
  const auto p = ensemble_log_prediction(models, testing::random_matrix(3, 2, 1));
  for (double v : p) EXPECT_NEAR(v, std::log(140.0 / 9.0), 1e-12);
}

}  // namespace
}  // namespace qsat
