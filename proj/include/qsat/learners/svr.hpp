#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qsat/learners/regressor.hpp"

namespace qsat {

enum class SvrKernel { Rbf, Poly, Linear };

struct SvrParams {
  double c = 10.0;
  int degree = 2;        // poly kernel only
  std::optional<double> gamma;  // nullopt = "scale"
  SvrKernel kernel = SvrKernel::Rbf;
  double epsilon = 0.1;
  double tol = 1e-3;
  long max_iter = 10'000'000;

  static SvrParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// 1 / (d * Var(all entries of x)), population variance; 1 when Var = 0.
double scale_gamma(const Matrix& x);

struct SvrSolution {
  std::vector<double> alpha;       // alpha_i
  std::vector<double> alpha_star;  // alpha*_i
  double bias = 0.0;
  double objective = 0.0;  // dual objective, minimization form
  long iterations = 0;
};

/// Epsilon-insensitive dual
///   min 1/2 (a - a*)' K (a - a*) + eps sum(a + a*) - y'(a - a*)
///   s.t. sum(a - a*) = 0, 0 <= a, a* <= C
/// solved by two-variable SMO with second-order working-set selection.
/// Stops when the maximal KKT violation drops below `tol`.
SvrSolution solve_svr_dual(const Matrix& kernel, std::span<const double> y, double c,
                           double epsilon, double tol, long max_iter);

class SvrModel final : public Regressor {
 public:
  SvrModel(SvrParams params, double gamma, Matrix support, std::vector<double> dual_coef,
           double bias, std::size_t features);

  ModelKind kind() const override { return ModelKind::Svr; }
  std::size_t feature_count() const override { return features_; }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;

  double gamma() const noexcept { return gamma_; }
  double bias() const noexcept { return bias_; }
  const Matrix& support_vectors() const noexcept { return support_; }
  const std::vector<double>& dual_coef() const noexcept { return dual_coef_; }

  static SvrModel from_state(const nlohmann::json& params, const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override;

 private:
  SvrParams params_;
  double gamma_;
  Matrix support_;
  std::vector<double> dual_coef_;
  double bias_;
  std::size_t features_;
};

double kernel_value(SvrKernel kernel, double gamma, int degree, std::span<const double> a,
                    std::span<const double> b);

SvrModel fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params = {},
                 SvrSolution* solution = nullptr);

}  // namespace qsat
