#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "qsat/evaluation.hpp"
#include "qsat/learners/factory.hpp"

namespace qsat::reference {

struct BestPoint {
  ModelKind kind;
  nlohmann::json params;
};

/// Reference best-parameter points, with scikit-learn pipeline prefixes
/// dropped. The MLP solver is the one this library ships (adam).
inline std::vector<BestPoint> reference_best_points() {
  using nlohmann::json;
  return {
      {ModelKind::Knn, {{"n_neighbors", 15}, {"p", 1}, {"weights", "distance"}}},
      {ModelKind::GradientBoosting,
       {{"learning_rate", 0.1}, {"loss", "squared_error"}, {"max_depth", 7},
        {"n_estimators", 200}, {"subsample", 0.8}}},
      {ModelKind::RandomForest,
       {{"max_depth", nullptr}, {"max_features", "sqrt"}, {"min_samples_leaf", 1},
        {"min_samples_split", 2}, {"n_estimators", 200}}},
      {ModelKind::RegularizedBoosting,
       {{"colsample_bytree", 1.0}, {"learning_rate", 0.1}, {"max_depth", 7},
        {"n_estimators", 200}, {"reg_alpha", 0}, {"reg_lambda", 1.5}, {"subsample", 0.8}}},
      {ModelKind::DecisionTree,
       {{"criterion", "squared_error"}, {"max_depth", nullptr}, {"max_features", "sqrt"},
        {"min_samples_leaf", 1}, {"min_samples_split", 2}}},
      {ModelKind::Svr, {{"C", 10.0}, {"degree", 2}, {"gamma", "scale"}, {"kernel", "rbf"}}},
      {ModelKind::Mlp,
       {{"activation", "logistic"}, {"alpha", 0.01}, {"early_stopping", true},
        {"hidden_layer_sizes", json::array({30})}, {"learning_rate", "constant"},
        {"solver", "adam"}}},
      {ModelKind::AdaBoostR2, {{"learning_rate", 0.05}, {"loss", "square"}, {"n_estimators", 100}}},
      {ModelKind::Ridge, {{"alpha", 50.0}}},
  };
}

/// Hyperparameters of `cell` with every default filled in, read back from a
/// model fitted on a tiny fixed data set.
inline nlohmann::json resolve_params(ModelKind kind, const nlohmann::json& cell) {
  Matrix x(24, 2);
  std::vector<double> y(24);
  for (std::size_t i = 0; i < 24; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = static_cast<double>(i % 3);
    y[i] = static_cast<double>(i % 5);
  }
  return fit_regressor(kind, x, y, cell, 0)->hyperparams();
}

/// True when some cell of `grid` resolves to values equal to every entry of
/// `point`.
inline bool grid_contains(ModelKind kind, const nlohmann::json& grid, const nlohmann::json& point) {
  for (const auto& cell : expand_grid(grid)) {
    const auto resolved = resolve_params(kind, cell);
    bool all = true;
    for (const auto& [key, value] : point.items()) {
      if (!resolved.contains(key) || resolved.at(key) != value) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

}  // namespace qsat::reference
