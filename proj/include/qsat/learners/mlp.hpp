#pragma once

#include <cstdint>
#include <vector>

#include "qsat/learners/regressor.hpp"

namespace qsat {

struct MlpParams {
  int hidden = 30;
  double alpha = 0.01;
  bool early_stopping = true;
  double learning_rate_init = 0.01;
  int max_iter = 2000;
  int n_iter_no_change = 20;
  double tol = 1e-6;  // minimum validation improvement that resets patience
  double validation_fraction = 0.1;

  static MlpParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// One logistic hidden layer and a linear output unit.
struct MlpWeights {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x inputs, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  MlpWeights() = default;
  MlpWeights(std::size_t inputs, std::size_t hidden);

  double forward(std::span<const double> row) const;
  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }
  /// Layout: w1, b1, w2, b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

struct MlpLoss {
  double value = 0.0;
  std::vector<double> gradient;  // same layout as MlpWeights::flatten
};

/// Loss 1/2 mean((f(x) - y)^2) + alpha/(2n) (||w1||^2 + ||w2||^2) and its
/// analytic gradient. Biases are not penalized.
MlpLoss mlp_loss_gradient(const MlpWeights& weights, const Matrix& x, std::span<const double> y,
                          double alpha);

/// Glorot-uniform initialization with the logistic gain (bound
/// sqrt(2 / (fan_in + fan_out))), biases included.
MlpWeights init_mlp_weights(std::size_t inputs, std::size_t hidden, std::uint64_t seed);

struct MlpTrace {
  std::vector<double> loss_curve;        // training loss before each update
  std::vector<double> validation_curve;  // empty without early stopping
  int best_iteration = -1;
};

class MlpModel final : public Regressor {
 public:
  MlpModel(MlpParams params, MlpWeights weights);

  ModelKind kind() const override { return ModelKind::Mlp; }
  std::size_t feature_count() const override { return weights_.inputs; }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;
  const MlpWeights& weights() const noexcept { return weights_; }

  static MlpModel from_state(const nlohmann::json& params, const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override {
    return weights_.forward(row);
  }

 private:
  MlpParams params_;
  MlpWeights weights_;
};

/// Full-batch Adam. With early stopping, a seeded validation_fraction of
/// the rows is held out and the weights with the best validation loss are
/// restored once `n_iter_no_change` iterations pass without an improvement
/// of at least `tol`.
MlpModel fit_mlp(const Matrix& x, std::span<const double> y, const MlpParams& params = {},
                 std::uint64_t seed = 0, MlpTrace* trace = nullptr);

}  // namespace qsat
