#include "qsat/learners/linear.hpp"

#include <algorithm>
#include <cmath>

#include "qsat/error.hpp"
#include "qsat/learners/params.hpp"

namespace qsat {

std::vector<double> solve_spd(const Matrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "solve_spd needs a square system");
  }
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double tiny = 1e-12 * std::max(max_diag, 1e-300);

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tiny)) {
      throw Error(ErrorCode::SingularSystem, "matrix is singular or not positive definite");
    }
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  std::vector<double> z(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * z[k];
    z[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = z[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

double LinearFit::predict(std::span<const double> row) const {
  double s = intercept;
  for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * row[j];
  return s;
}

namespace {

struct Centered {
  std::vector<double> x_mean;
  double y_mean = 0.0;
};

Centered centers(const Matrix& x, std::span<const double> y, bool center) {
  Centered c;
  c.x_mean.assign(x.cols(), 0.0);
  if (!center) return c;
  const double n = static_cast<double>(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < x.cols(); ++j) c.x_mean[j] += x(r, j);
    c.y_mean += y[r];
  }
  for (auto& m : c.x_mean) m /= n;
  c.y_mean /= n;
  return c;
}

}  // namespace

LinearFit solve_ridge(const Matrix& x, std::span<const double> y, double alpha,
                      bool fit_intercept) {
  const std::size_t d = x.cols();
  const auto c = centers(x, y, fit_intercept);
  Matrix gram(d, d);
  std::vector<double> rhs(d, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double yc = y[r] - c.y_mean;
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = x(r, i) - c.x_mean[i];
      rhs[i] += xi * yc;
      for (std::size_t j = 0; j <= i; ++j) gram(i, j) += xi * (x(r, j) - c.x_mean[j]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram(j, i) = gram(i, j);
    gram(i, i) += alpha;
  }
  LinearFit fit;
  fit.coef = solve_spd(gram, rhs);
  fit.intercept = c.y_mean;
  for (std::size_t j = 0; j < d; ++j) fit.intercept -= fit.coef[j] * c.x_mean[j];
  return fit;
}

LinearFit solve_least_squares(const Matrix& x, std::span<const double> y,
                              double fallback_lambda) {
  try {
    return solve_ridge(x, y, 0.0);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularSystem) throw;
  }
  return solve_ridge(x, y, fallback_lambda);
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

LinearFit solve_elastic_net(const Matrix& x, std::span<const double> y,
                            const ElasticNetOptions& options) {
  const std::size_t n = x.rows(), d = x.cols();
  const auto c = centers(x, y, true);
  std::vector<double> scale(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = x(r, j) - c.x_mean[j];
      scale[j] += v * v;
    }
  }
  for (auto& s : scale) s = std::sqrt(s / static_cast<double>(n));

  // Standardized design, column-major for the coordinate sweeps.
  std::vector<std::vector<double>> cols(d, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < d; ++j) {
    if (scale[j] < 1e-12) continue;
    for (std::size_t r = 0; r < n; ++r) cols[j][r] = (x(r, j) - c.x_mean[j]) / scale[j];
  }
  std::vector<double> resid(n);
  for (std::size_t r = 0; r < n; ++r) resid[r] = y[r] - c.y_mean;

  const double l1 = options.alpha * options.l1_ratio;
  const double l2 = options.alpha * (1.0 - options.l1_ratio);
  std::vector<double> w(d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  bool converged = false;
  for (int it = 0; it < options.max_iter; ++it) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (scale[j] < 1e-12) continue;
      const auto& col = cols[j];
      double rho = 0.0;
      for (std::size_t r = 0; r < n; ++r) rho += col[r] * resid[r];
      // Columns have unit population variance, so x_j.x_j / n = 1.
      rho = rho * inv_n + w[j];
      const double updated = soft_threshold(rho, l1) / (1.0 + l2);
      const double delta = updated - w[j];
      if (delta != 0.0) {
        for (std::size_t r = 0; r < n; ++r) resid[r] -= delta * col[r];
        w[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    if (max_change < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::NonConvergence, "coordinate descent did not converge within " +
                                               std::to_string(options.max_iter) + " iterations");
  }
  LinearFit fit;
  fit.coef.assign(d, 0.0);
  fit.intercept = c.y_mean;
  for (std::size_t j = 0; j < d; ++j) {
    if (scale[j] < 1e-12) continue;
    fit.coef[j] = w[j] / scale[j];
    fit.intercept -= fit.coef[j] * c.x_mean[j];
  }
  return fit;
}

RidgeParams RidgeParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  RidgeParams p;
  p.alpha = r.number("alpha", 50.0);
  p.fit_intercept = r.boolean("fit_intercept", true);
  r.finish();
  if (!(p.alpha >= 0.0) || !std::isfinite(p.alpha)) r.fail("alpha", "must be finite and >= 0");
  return p;
}

nlohmann::json RidgeParams::to_json() const {
  return {{"alpha", alpha}, {"fit_intercept", fit_intercept}};
}

LassoParams LassoParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  LassoParams p;
  p.alpha = r.number("alpha", 0.01);
  p.max_iter = r.integer("max_iter", 100000);
  p.tol = r.number("tol", 1e-8);
  r.finish();
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) r.fail("alpha", "must be finite and > 0");
  if (p.max_iter < 1) r.fail("max_iter", "must be >= 1");
  if (!(p.tol > 0.0)) r.fail("tol", "must be > 0");
  return p;
}

nlohmann::json LassoParams::to_json() const {
  return {{"alpha", alpha}, {"max_iter", max_iter}, {"tol", tol}};
}

LinearModel::LinearModel(ModelKind kind, nlohmann::json params, LinearFit fit)
    : kind_(kind), params_(std::move(params)), fit_(std::move(fit)) {
  if (fit_.coef.empty()) throw Error(ErrorCode::Schema, "linear model has no coefficients");
}

nlohmann::json LinearModel::state() const {
  return {{"coef", fit_.coef}, {"intercept", fit_.intercept}};
}

LinearModel LinearModel::from_state(ModelKind kind, const nlohmann::json& params,
                                    const nlohmann::json& state) {
  LinearFit fit;
  fit.coef = state.at("coef").get<std::vector<double>>();
  fit.intercept = state.at("intercept").get<double>();
  const auto resolved = kind == ModelKind::Ridge ? RidgeParams::from_json(params).to_json()
                                                 : LassoParams::from_json(params).to_json();
  return LinearModel(kind, resolved, std::move(fit));
}

LinearModel fit_ridge(const Matrix& x, std::span<const double> y, const RidgeParams& params) {
  check_training_data(x, y);
  return LinearModel(ModelKind::Ridge, params.to_json(),
                     solve_ridge(x, y, params.alpha, params.fit_intercept));
}

LinearModel fit_lasso(const Matrix& x, std::span<const double> y, const LassoParams& params) {
  check_training_data(x, y);
  ElasticNetOptions opt;
  opt.alpha = params.alpha;
  opt.l1_ratio = 1.0;
  opt.max_iter = params.max_iter;
  opt.tol = params.tol;
  return LinearModel(ModelKind::Lasso, params.to_json(), solve_elastic_net(x, y, opt));
}

}  // namespace qsat
