#pragma once

#include <array>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qsat/matrix.hpp"

namespace qsat {

enum class ModelKind {
  Knn,
  DecisionTree,
  RandomForest,
  GradientBoosting,
  RegularizedBoosting,
  AdaBoostR2,
  Ridge,
  Lasso,
  Svr,
  Mlp,
};

/// The nine comparison learners (lasso is optional and not part of it).
inline constexpr std::array<ModelKind, 9> kCoreKinds = {
    ModelKind::Knn,        ModelKind::GradientBoosting,    ModelKind::RandomForest,
    ModelKind::RegularizedBoosting, ModelKind::DecisionTree, ModelKind::Svr,
    ModelKind::Mlp,        ModelKind::AdaBoostR2,          ModelKind::Ridge};

std::string_view kind_name(ModelKind kind);
ModelKind parse_kind(std::string_view name);
bool is_tree_kind(ModelKind kind);

/// Uniform contract for a fitted learner. Targets and predictions live in
/// log-participant space. Fitted models are immutable, so one instance can
/// serve any number of concurrent predict calls.
class Regressor {
 public:
  virtual ~Regressor() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t feature_count() const = 0;
  /// Fully resolved hyperparameters (defaults filled in).
  virtual nlohmann::json hyperparams() const = 0;
  /// Kind-specific fitted state; `regressor_from_json` inverts it.
  virtual nlohmann::json state() const = 0;

  /// Rejects width mismatches and non-finite entries.
  std::vector<double> predict(const Matrix& x) const;
  double predict_one(std::span<const double> row) const;

 protected:
  /// Unchecked single-row prediction.
  virtual double predict_row(std::span<const double> row) const = 0;
};

using RegressorPtr = std::shared_ptr<const Regressor>;

/// Throws unless x has n >= 1 rows, y has n entries and everything is finite.
void check_training_data(const Matrix& x, std::span<const double> y);

}  // namespace qsat
