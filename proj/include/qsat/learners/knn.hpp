#pragma once

#include <cstdint>
#include <vector>

#include "qsat/learners/regressor.hpp"

namespace qsat {

enum class KnnWeights { Uniform, Distance };

struct KnnParams {
  int n_neighbors = 15;
  double p = 1.0;
  KnnWeights weights = KnnWeights::Distance;

  static KnnParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Stores the training set. Neighbors are ordered by (distance, training
/// index), so ties at the k-th distance resolve to the earlier row.
class KnnModel final : public Regressor {
 public:
  KnnModel(KnnParams params, Matrix x, std::vector<double> y);

  ModelKind kind() const override { return ModelKind::Knn; }
  std::size_t feature_count() const override { return x_.cols(); }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;

  /// Indices of the k nearest training rows, nearest first.
  std::vector<std::size_t> neighbors(std::span<const double> row) const;

  static KnnModel from_state(const nlohmann::json& params, const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override;

 private:
  KnnParams params_;
  Matrix x_;
  std::vector<double> y_;
};

double minkowski_distance(std::span<const double> a, std::span<const double> b, double p);

KnnModel fit_knn(const Matrix& x, std::span<const double> y, const KnnParams& params = {});

}  // namespace qsat
