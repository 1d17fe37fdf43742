#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsat/evaluation.hpp"
#include "qsat/learners/linear.hpp"
#include "qsat/learners/regressor.hpp"

namespace qsat {

/// Fits one base learner on a training fold.
using BaseFitter = std::function<RegressorPtr(const Matrix& x, std::span<const double> y,
                                              std::uint64_t seed)>;

/// Column j, row i holds the prediction for row i of the model fitted by
/// `fitters[j]` on every fold except the one containing i.
Matrix build_oof_matrix(const Matrix& x, std::span<const double> y,
                        std::span<const BaseFitter> fitters, const FoldPlan& plan,
                        std::uint64_t seed);

enum class MetaKind { Linear, ElasticNet };

struct StackingConfig {
  std::vector<ModelKind> base_kinds = {ModelKind::Knn, ModelKind::GradientBoosting,
                                       ModelKind::RandomForest, ModelKind::RegularizedBoosting,
                                       ModelKind::DecisionTree};
  /// Hyperparameters per base kind; missing kinds use default_params.
  std::map<ModelKind, nlohmann::json> base_params;
  MetaKind meta = MetaKind::Linear;
  double elastic_alpha = 0.01;
  double elastic_l1_ratio = 0.5;
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

class StackedModel {
 public:
  StackedModel(std::vector<std::string> base_names, std::vector<RegressorPtr> bases,
               MetaKind meta, LinearFit meta_fit, std::size_t folds, std::uint64_t seed);

  const std::vector<std::string>& base_names() const noexcept { return names_; }
  const std::vector<RegressorPtr>& bases() const noexcept { return bases_; }
  const LinearFit& meta_fit() const noexcept { return meta_fit_; }
  MetaKind meta() const noexcept { return meta_; }
  std::size_t folds() const noexcept { return folds_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Base predictions combined by the meta-learner, in log space.
  std::vector<double> predict(const Matrix& x) const;
  double predict_one(std::span<const double> row) const;

  /// Bases serialize through regressor_to_json; stub bases cannot.
  nlohmann::json to_json() const;
  static StackedModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> names_;
  std::vector<RegressorPtr> bases_;
  MetaKind meta_;
  LinearFit meta_fit_;
  std::size_t folds_;
  std::uint64_t seed_;
};

struct StackingFit {
  StackedModel model;
  Matrix oof;
};

/// Generic form: OOF matrix from `fitters`, meta-learner on (OOF, y), then
/// every base refit on all of (x, y).
StackingFit fit_stacked(const Matrix& x, std::span<const double> y,
                        const std::vector<std::string>& names,
                        std::span<const BaseFitter> fitters, MetaKind meta,
                        const StackingConfig& config);
StackingFit fit_stacked(const Matrix& x, std::span<const double> y, const StackingConfig& config);

/// Arithmetic mean of raw-scale predictions; `per_model` must hold exactly
/// the nine core kinds.
double ensemble_average(const std::map<ModelKind, double>& per_model);

/// ln(mean_k exp(model_k(x))) over the nine core kinds: the log of the
/// raw-scale ensemble average, used for conformal scoring.
std::vector<double> ensemble_log_prediction(const std::map<ModelKind, RegressorPtr>& models,
                                            const Matrix& x);

std::string to_string(MetaKind meta);

}  // namespace qsat
