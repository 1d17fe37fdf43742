#include "qsat/learners/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsat/error.hpp"
#include "qsat/learners/params.hpp"

namespace qsat {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string kernel_name(SvrKernel k) {
  switch (k) {
    case SvrKernel::Rbf: return "rbf";
    case SvrKernel::Poly: return "poly";
    case SvrKernel::Linear: return "linear";
  }
  return "rbf";
}

}  // namespace

SvrParams SvrParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  SvrParams p;
  p.c = r.number("C", 10.0);
  p.degree = r.integer("degree", 2);
  if (const auto* g = r.raw("gamma")) {
    if (g->is_string() && g->get<std::string>() == "scale") {
      p.gamma.reset();
    } else if (g->is_number()) {
      p.gamma = g->get<double>();
      if (!(*p.gamma > 0.0)) r.fail("gamma", "must be > 0 or \"scale\"");
    } else {
      r.fail("gamma", "must be a number or \"scale\"");
    }
  }
  const auto kernel = r.text("kernel", "rbf");
  if (kernel == "rbf") {
    p.kernel = SvrKernel::Rbf;
  } else if (kernel == "poly") {
    p.kernel = SvrKernel::Poly;
  } else if (kernel == "linear") {
    p.kernel = SvrKernel::Linear;
  } else {
    r.fail("kernel", "must be rbf, poly or linear");
  }
  p.epsilon = r.number("epsilon", 0.1);
  p.tol = r.number("tol", 1e-3);
  p.max_iter = r.integer("max_iter", 10'000'000);
  r.finish();
  if (!(p.c > 0.0)) r.fail("C", "must be > 0");
  if (!(p.epsilon >= 0.0)) r.fail("epsilon", "must be >= 0");
  if (p.degree < 1) r.fail("degree", "must be >= 1");
  if (!(p.tol > 0.0)) r.fail("tol", "must be > 0");
  if (p.max_iter < 1) r.fail("max_iter", "must be >= 1");
  return p;
}

nlohmann::json SvrParams::to_json() const {
  return {{"C", c},
          {"degree", degree},
          {"epsilon", epsilon},
          {"gamma", gamma ? nlohmann::json(*gamma) : nlohmann::json("scale")},
          {"kernel", kernel_name(kernel)},
          {"max_iter", max_iter},
          {"tol", tol}};
}

double scale_gamma(const Matrix& x) {
  const auto& v = x.data();
  if (v.empty()) return 1.0;
  double mean = 0.0;
  for (double e : v) mean += e;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double e : v) var += (e - mean) * (e - mean);
  var /= static_cast<double>(v.size());
  if (var == 0.0) return 1.0;
  return 1.0 / (static_cast<double>(x.cols()) * var);
}

double kernel_value(SvrKernel kernel, double gamma, int degree, std::span<const double> a,
                    std::span<const double> b) {
  switch (kernel) {
    case SvrKernel::Rbf: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::exp(-gamma * s);
    }
    case SvrKernel::Poly: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return std::pow(gamma * s, degree);
    }
    case SvrKernel::Linear: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    }
  }
  return 0.0;
}

SvrSolution solve_svr_dual(const Matrix& kernel, std::span<const double> y, double c,
                           double epsilon, double tol, long max_iter) {
  const std::size_t l = y.size();
  const std::size_t m = 2 * l;
  // Variables beta = [alpha; alpha*] with signs s = [+1; -1]; the folded
  // Hessian is Q_ts = s_t s_s K(t mod l, s mod l).
  auto sign = [l](std::size_t t) { return t < l ? 1.0 : -1.0; };
  auto base = [l](std::size_t t) { return t < l ? t : t - l; };
  auto q = [&](std::size_t t, std::size_t s) {
    return sign(t) * sign(s) * kernel(base(t), base(s));
  };

  std::vector<double> beta(m, 0.0), grad(m), p(m);
  for (std::size_t i = 0; i < l; ++i) {
    p[i] = epsilon - y[i];
    p[i + l] = epsilon + y[i];
  }
  grad = p;
  auto upper = [&](std::size_t t) { return beta[t] >= c; };
  auto lower = [&](std::size_t t) { return beta[t] <= 0.0; };

  long iter = 0;
  for (;; ++iter) {
    if (iter >= max_iter) {
      throw Error(ErrorCode::NonConvergence,
                  "SMO did not converge within " + std::to_string(max_iter) + " iterations");
    }
    double gmax = -kInf, gmax2 = -kInf;
    std::ptrdiff_t i_sel = -1, j_sel = -1;
    for (std::size_t t = 0; t < m; ++t) {
      if (sign(t) > 0) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i_sel = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i_sel = static_cast<std::ptrdiff_t>(t);
      }
    }
    double obj_min = kInf;
    if (i_sel >= 0) {
      const auto i = static_cast<std::size_t>(i_sel);
      const double qii = q(i, i);
      for (std::size_t t = 0; t < m; ++t) {
        if (sign(t) > 0) {
          if (lower(t)) continue;
          const double diff = gmax + grad[t];
          gmax2 = std::max(gmax2, grad[t]);
          if (diff > 0.0) {
            double quad = qii + q(t, t) - 2.0 * sign(i) * q(i, t);
            if (quad <= 0.0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= obj_min) {
              obj_min = obj;
              j_sel = static_cast<std::ptrdiff_t>(t);
            }
          }
        } else {
          if (upper(t)) continue;
          const double diff = gmax - grad[t];
          gmax2 = std::max(gmax2, -grad[t]);
          if (diff > 0.0) {
            double quad = qii + q(t, t) + 2.0 * sign(i) * q(i, t);
            if (quad <= 0.0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= obj_min) {
              obj_min = obj;
              j_sel = static_cast<std::ptrdiff_t>(t);
            }
          }
        }
      }
    }
    if (i_sel < 0 || j_sel < 0 || gmax + gmax2 < tol) break;

    const auto i = static_cast<std::size_t>(i_sel);
    const auto j = static_cast<std::size_t>(j_sel);
    const double old_i = beta[i], old_j = beta[j];
    const double qij = q(i, j);
    if (sign(i) != sign(j)) {
      double quad = q(i, i) + q(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = beta[i] - beta[j];
      beta[i] += delta;
      beta[j] += delta;
      if (diff > 0.0) {
        if (beta[j] < 0.0) {
          beta[j] = 0.0;
          beta[i] = diff;
        }
      } else if (beta[i] < 0.0) {
        beta[i] = 0.0;
        beta[j] = -diff;
      }
      if (diff > 0.0) {
        if (beta[i] > c) {
          beta[i] = c;
          beta[j] = c - diff;
        }
      } else if (beta[j] > c) {
        beta[j] = c;
        beta[i] = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = beta[i] + beta[j];
      beta[i] -= delta;
      beta[j] += delta;
      if (sum > c) {
        if (beta[i] > c) {
          beta[i] = c;
          beta[j] = sum - c;
        }
      } else if (beta[j] < 0.0) {
        beta[j] = 0.0;
        beta[i] = sum;
      }
      if (sum > c) {
        if (beta[j] > c) {
          beta[j] = c;
          beta[i] = sum - c;
        }
      } else if (beta[i] < 0.0) {
        beta[i] = 0.0;
        beta[j] = sum;
      }
    }
    const double di = beta[i] - old_i, dj = beta[j] - old_j;
    for (std::size_t t = 0; t < m; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }

  // Bias from free variables, or the midpoint of the feasible range.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const double yg = sign(t) * grad[t];
    if (upper(t)) {
      if (sign(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (sign(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      sum_free += yg;
    }
  }
  const double rho = free_count > 0 ? sum_free / static_cast<double>(free_count) : (ub + lb) / 2.0;

  SvrSolution sol;
  sol.alpha.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(l));
  sol.alpha_star.assign(beta.begin() + static_cast<std::ptrdiff_t>(l), beta.end());
  sol.bias = -rho;
  sol.iterations = iter;
  double obj = 0.0;
  for (std::size_t t = 0; t < m; ++t) obj += beta[t] * (grad[t] + p[t]);
  sol.objective = 0.5 * obj;
  return sol;
}

SvrModel::SvrModel(SvrParams params, double gamma, Matrix support, std::vector<double> dual_coef,
                   double bias, std::size_t features)
    : params_(params), gamma_(gamma), support_(std::move(support)),
      dual_coef_(std::move(dual_coef)), bias_(bias), features_(features) {
  if (support_.rows() != dual_coef_.size()) {
    throw Error(ErrorCode::Schema, "svr needs one dual coefficient per support vector");
  }
  if (support_.rows() > 0 && support_.cols() != features_) {
    throw Error(ErrorCode::Schema, "support vector width differs from feature count");
  }
}

double SvrModel::predict_row(std::span<const double> row) const {
  double f = bias_;
  for (std::size_t s = 0; s < support_.rows(); ++s) {
    f += dual_coef_[s] * kernel_value(params_.kernel, gamma_, params_.degree, support_.row(s), row);
  }
  return f;
}

nlohmann::json SvrModel::state() const {
  return {{"bias", bias_},
          {"dual_coef", dual_coef_},
          {"feature_count", features_},
          {"gamma", gamma_},
          {"support_vectors", support_.data()}};
}

SvrModel SvrModel::from_state(const nlohmann::json& params, const nlohmann::json& state) {
  const auto features = state.at("feature_count").get<std::size_t>();
  auto dual = state.at("dual_coef").get<std::vector<double>>();
  Matrix support(dual.size(), features, state.at("support_vectors").get<std::vector<double>>());
  return SvrModel(SvrParams::from_json(params), state.at("gamma").get<double>(),
                  std::move(support), std::move(dual), state.at("bias").get<double>(), features);
}

SvrModel fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params,
                 SvrSolution* solution) {
  check_training_data(x, y);
  const double gamma = params.gamma ? *params.gamma : scale_gamma(x);
  const std::size_t n = x.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = kernel_value(params.kernel, gamma, params.degree, x.row(i), x.row(j));
    }
  }
  auto sol = solve_svr_dual(k, y, params.c, params.epsilon, params.tol, params.max_iter);
  Matrix support(0, x.cols());
  std::vector<double> coef;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = sol.alpha[i] - sol.alpha_star[i];
    if (d != 0.0) {
      support.append_row(x.row(i));
      coef.push_back(d);
    }
  }
  SvrModel model(params, gamma, std::move(support), std::move(coef), sol.bias, x.cols());
  if (solution) *solution = std::move(sol);
  return model;
}

}  // namespace qsat
