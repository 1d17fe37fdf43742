#pragma once

#include <cstdint>
#include <vector>

#include "qsat/learners/regressor.hpp"

namespace qsat {

/// Solves A x = b for symmetric positive-definite A (row-major, n x n) by
/// Cholesky factorization. Throws SingularSystem when a pivot falls below
/// 1e-12 times the largest diagonal entry.
std::vector<double> solve_spd(const Matrix& a, std::span<const double> b);

struct LinearFit {
  std::vector<double> coef;
  double intercept = 0.0;

  double predict(std::span<const double> row) const;
};

/// Minimizes ||y - Xw - b||^2 + alpha ||w||^2 with the intercept b left
/// unpenalized (solved on centered data).
LinearFit solve_ridge(const Matrix& x, std::span<const double> y, double alpha,
                      bool fit_intercept = true);

/// Least squares; if the normal equations are singular, retries with a
/// ridge penalty of `fallback_lambda`.
LinearFit solve_least_squares(const Matrix& x, std::span<const double> y,
                              double fallback_lambda = 1e-8);

struct ElasticNetOptions {
  double alpha = 1.0;
  double l1_ratio = 1.0;  // 1 = lasso
  int max_iter = 100000;
  double tol = 1e-8;      // max absolute coefficient change per sweep
};

/// Coordinate descent on internally standardized columns (population std)
/// for
///   (1/2n) ||y - Xs w - b||^2 + alpha l1 ||w||_1 + alpha (1 - l1)/2 ||w||^2,
/// where Xs is the standardized design. Coefficients are mapped back to the
/// input scale. Constant columns get coefficient 0. Throws NonConvergence
/// at the iteration cap.
LinearFit solve_elastic_net(const Matrix& x, std::span<const double> y,
                            const ElasticNetOptions& options);

double soft_threshold(double value, double threshold);

struct RidgeParams {
  double alpha = 50.0;
  bool fit_intercept = true;

  static RidgeParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct LassoParams {
  double alpha = 0.01;
  int max_iter = 100000;
  double tol = 1e-8;

  static LassoParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class LinearModel final : public Regressor {
 public:
  LinearModel(ModelKind kind, nlohmann::json params, LinearFit fit);

  ModelKind kind() const override { return kind_; }
  std::size_t feature_count() const override { return fit_.coef.size(); }
  nlohmann::json hyperparams() const override { return params_; }
  nlohmann::json state() const override;
  const LinearFit& fit() const noexcept { return fit_; }

  static LinearModel from_state(ModelKind kind, const nlohmann::json& params,
                                const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override { return fit_.predict(row); }

 private:
  ModelKind kind_;
  nlohmann::json params_;
  LinearFit fit_;
};

LinearModel fit_ridge(const Matrix& x, std::span<const double> y, const RidgeParams& params = {});
LinearModel fit_lasso(const Matrix& x, std::span<const double> y, const LassoParams& params = {});

}  // namespace qsat
