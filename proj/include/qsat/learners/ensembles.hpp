#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsat/learners/tree.hpp"

namespace qsat {

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

struct RandomForestParams {
  int n_estimators = 200;
  std::optional<int> max_depth;
  MaxFeatures max_features = MaxFeatures::Sqrt;
  int min_samples_leaf = 1;
  int min_samples_split = 2;
  bool bootstrap = true;

  static RandomForestParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class RandomForestModel final : public Regressor {
 public:
  RandomForestModel(RandomForestParams params, std::vector<RegressionTree> trees,
                    std::size_t features)
      : params_(params), trees_(std::move(trees)), features_(features) {}

  ModelKind kind() const override { return ModelKind::RandomForest; }
  std::size_t feature_count() const override { return features_; }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

  static RandomForestModel from_state(const nlohmann::json& params, const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override;

 private:
  RandomForestParams params_;
  std::vector<RegressionTree> trees_;
  std::size_t features_;
};

/// Trees are grown in parallel; tree t draws its bootstrap and feature
/// subsets from derive_seed(seed, t), so the result is thread-count free.
RandomForestModel fit_random_forest(const Matrix& x, std::span<const double> y,
                                    const RandomForestParams& params = {},
                                    std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Gradient boosting (squared loss) and its regularized second-order variant
// ---------------------------------------------------------------------------

struct GradientBoostingParams {
  double learning_rate = 0.1;
  std::optional<int> max_depth = 7;
  int n_estimators = 200;
  double subsample = 0.8;
  int min_samples_split = 2;
  int min_samples_leaf = 1;

  static GradientBoostingParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RegularizedBoostingParams {
  double colsample_bytree = 1.0;
  double learning_rate = 0.1;
  std::optional<int> max_depth = 7;
  int n_estimators = 200;
  double reg_alpha = 0.0;
  double reg_lambda = 1.5;
  double subsample = 0.8;
  int min_samples_split = 2;
  int min_samples_leaf = 1;

  static RegularizedBoostingParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Additive model F(x) = base + learning_rate * sum_m tree_m(x). Shared by
/// both boosting kinds; they differ only in how trees are grown.
class BoostedTrees {
 public:
  BoostedTrees() = default;
  BoostedTrees(double base, double learning_rate, std::vector<RegressionTree> trees)
      : base_(base), learning_rate_(learning_rate), trees_(std::move(trees)) {}

  double predict_row(std::span<const double> row) const {
    return predict_row(row, trees_.size());
  }
  /// Prediction using only the first `stages` trees (0 = base score).
  double predict_row(std::span<const double> row, std::size_t stages) const;

  double base() const noexcept { return base_; }
  double learning_rate() const noexcept { return learning_rate_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

  nlohmann::json to_json() const;
  static BoostedTrees from_json(const nlohmann::json& j);

 private:
  double base_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<RegressionTree> trees_;
};

class GradientBoostingModel final : public Regressor {
 public:
  GradientBoostingModel(GradientBoostingParams params, BoostedTrees ensemble,
                        std::size_t features)
      : params_(params), ensemble_(std::move(ensemble)), features_(features) {}

  ModelKind kind() const override { return ModelKind::GradientBoosting; }
  std::size_t feature_count() const override { return features_; }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;
  const BoostedTrees& ensemble() const noexcept { return ensemble_; }
  std::vector<double> predict_stages(const Matrix& x, std::size_t stages) const;

  static GradientBoostingModel from_state(const nlohmann::json& params,
                                          const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override {
    return ensemble_.predict_row(row);
  }

 private:
  GradientBoostingParams params_;
  BoostedTrees ensemble_;
  std::size_t features_;
};

class RegularizedBoostingModel final : public Regressor {
 public:
  RegularizedBoostingModel(RegularizedBoostingParams params, BoostedTrees ensemble,
                           std::size_t features)
      : params_(params), ensemble_(std::move(ensemble)), features_(features) {}

  ModelKind kind() const override { return ModelKind::RegularizedBoosting; }
  std::size_t feature_count() const override { return features_; }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;
  const BoostedTrees& ensemble() const noexcept { return ensemble_; }
  std::vector<double> predict_stages(const Matrix& x, std::size_t stages) const;

  static RegularizedBoostingModel from_state(const nlohmann::json& params,
                                             const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override {
    return ensemble_.predict_row(row);
  }

 private:
  RegularizedBoostingParams params_;
  BoostedTrees ensemble_;
  std::size_t features_;
};

/// F0 = mean(y); stage m fits a depth-limited CART tree to the residuals on
/// a seeded row subsample (without replacement) and adds lr * tree.
GradientBoostingModel fit_gradient_boosting(const Matrix& x, std::span<const double> y,
                                            const GradientBoostingParams& params = {},
                                            std::uint64_t seed = 0);

/// Squared loss, g = F - y, h = 1; leaf weight -T_alpha(G)/(H + lambda).
/// Row subsamples come from the same streams as gradient boosting, so with
/// lambda = alpha = 0 and colsample 1 both kinds grow identical trees.
RegularizedBoostingModel fit_regularized_boosting(const Matrix& x, std::span<const double> y,
                                                  const RegularizedBoostingParams& params = {},
                                                  std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// AdaBoost.R2
// ---------------------------------------------------------------------------

enum class AdaLoss { Linear, Square, Exponential };

struct AdaBoostParams {
  double learning_rate = 0.05;
  AdaLoss loss = AdaLoss::Square;
  int n_estimators = 100;
  int max_depth = 3;  // depth of the weak learner

  static AdaBoostParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Per-round bookkeeping, filled only when a trace is requested.
struct AdaBoostRound {
  std::vector<double> sample_weights;  // normalized weights the round resampled with
  std::vector<double> losses;          // per-sample L_i
  double average_loss = 0.0;
  double beta = 0.0;
  double estimator_weight = 0.0;
  bool kept = true;
};

struct AdaBoostTrace {
  std::vector<AdaBoostRound> rounds;
};

class AdaBoostModel final : public Regressor {
 public:
  AdaBoostModel(AdaBoostParams params, std::vector<RegressionTree> trees,
                std::vector<double> weights, std::size_t features);

  ModelKind kind() const override { return ModelKind::AdaBoostR2; }
  std::size_t feature_count() const override { return features_; }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  const std::vector<double>& estimator_weights() const noexcept { return weights_; }

  static AdaBoostModel from_state(const nlohmann::json& params, const nlohmann::json& state);

 protected:
  /// Weighted median of the member predictions.
  double predict_row(std::span<const double> row) const override;

 private:
  AdaBoostParams params_;
  std::vector<RegressionTree> trees_;
  std::vector<double> weights_;
  std::size_t features_;
};

AdaBoostModel fit_adaboost_r2(const Matrix& x, std::span<const double> y,
                              const AdaBoostParams& params = {}, std::uint64_t seed = 0,
                              AdaBoostTrace* trace = nullptr);

double weighted_median(std::span<const double> values, std::span<const double> weights);

}  // namespace qsat
