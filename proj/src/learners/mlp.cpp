#include "qsat/learners/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qsat/error.hpp"
#include "qsat/learners/params.hpp"
#include "qsat/random.hpp"

namespace qsat {

namespace {

constexpr std::uint64_t kInitSalt = 0x1417;
constexpr std::uint64_t kValidationSalt = 0x7a11d;

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

MlpParams MlpParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  MlpParams p;
  if (r.text("activation", "logistic") != "logistic") {
    r.fail("activation", "only logistic is supported");
  }
  p.alpha = r.number("alpha", 0.01);
  p.early_stopping = r.boolean("early_stopping", true);
  if (const auto* h = r.raw("hidden_layer_sizes")) {
    if (!h->is_array() || h->size() != 1 || !(*h)[0].is_number_integer()) {
      r.fail("hidden_layer_sizes", "must be a one-element integer array");
    }
    p.hidden = (*h)[0].get<int>();
  }
  if (r.text("learning_rate", "constant") != "constant") {
    r.fail("learning_rate", "only constant is supported");
  }
  if (r.text("solver", "adam") != "adam") r.fail("solver", "only adam is supported");
  p.learning_rate_init = r.number("learning_rate_init", 0.01);
  p.max_iter = r.integer("max_iter", 2000);
  p.n_iter_no_change = r.integer("n_iter_no_change", 20);
  p.tol = r.number("tol", 1e-6);
  p.validation_fraction = r.number("validation_fraction", 0.1);
  r.finish();
  if (p.hidden < 1) r.fail("hidden_layer_sizes", "hidden layer needs >= 1 unit");
  if (!(p.alpha >= 0.0)) r.fail("alpha", "must be >= 0");
  if (!(p.learning_rate_init > 0.0)) r.fail("learning_rate_init", "must be > 0");
  if (p.max_iter < 0) r.fail("max_iter", "must be >= 0");
  if (p.n_iter_no_change < 1) r.fail("n_iter_no_change", "must be >= 1");
  if (!(p.tol >= 0.0)) r.fail("tol", "must be >= 0");
  if (!(p.validation_fraction > 0.0 && p.validation_fraction < 1.0)) {
    r.fail("validation_fraction", "must lie in (0, 1)");
  }
  return p;
}

nlohmann::json MlpParams::to_json() const {
  return {{"activation", "logistic"},
          {"alpha", alpha},
          {"early_stopping", early_stopping},
          {"hidden_layer_sizes", {hidden}},
          {"learning_rate", "constant"},
          {"learning_rate_init", learning_rate_init},
          {"max_iter", max_iter},
          {"n_iter_no_change", n_iter_no_change},
          {"solver", "adam"},
          {"tol", tol},
          {"validation_fraction", validation_fraction}};
}

MlpWeights::MlpWeights(std::size_t in, std::size_t h)
    : inputs(in), hidden(h), w1(in * h, 0.0), b1(h, 0.0), w2(h, 0.0) {}

double MlpWeights::forward(std::span<const double> row) const {
  double out = b2;
  for (std::size_t k = 0; k < hidden; ++k) {
    double a = b1[k];
    const double* w = w1.data() + k * inputs;
    for (std::size_t j = 0; j < inputs; ++j) a += w[j] * row[j];
    out += w2[k] * logistic(a);
  }
  return out;
}

std::vector<double> MlpWeights::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), w1.begin(), w1.end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.push_back(b2);
  return flat;
}

void MlpWeights::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::InvalidArgument, "parameter vector has the wrong length");
  }
  auto it = flat.begin();
  std::copy(it, it + static_cast<std::ptrdiff_t>(w1.size()), w1.begin());
  it += static_cast<std::ptrdiff_t>(w1.size());
  std::copy(it, it + static_cast<std::ptrdiff_t>(b1.size()), b1.begin());
  it += static_cast<std::ptrdiff_t>(b1.size());
  std::copy(it, it + static_cast<std::ptrdiff_t>(w2.size()), w2.begin());
  it += static_cast<std::ptrdiff_t>(w2.size());
  b2 = *it;
}

MlpLoss mlp_loss_gradient(const MlpWeights& wts, const Matrix& x, std::span<const double> y,
                          double alpha) {
  const std::size_t n = x.rows(), d = wts.inputs, h = wts.hidden;
  const double inv_n = 1.0 / static_cast<double>(n);
  MlpWeights g(d, h);
  std::vector<double> act(h);
  double sse = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x.row(r);
    double out = wts.b2;
    for (std::size_t k = 0; k < h; ++k) {
      double a = wts.b1[k];
      const double* w = wts.w1.data() + k * d;
      for (std::size_t j = 0; j < d; ++j) a += w[j] * row[j];
      act[k] = logistic(a);
      out += wts.w2[k] * act[k];
    }
    const double err = out - y[r];
    sse += err * err;
    const double delta = err * inv_n;
    g.b2 += delta;
    for (std::size_t k = 0; k < h; ++k) {
      g.w2[k] += delta * act[k];
      const double dh = delta * wts.w2[k] * act[k] * (1.0 - act[k]);
      g.b1[k] += dh;
      double* gw = g.w1.data() + k * d;
      for (std::size_t j = 0; j < d; ++j) gw[j] += dh * row[j];
    }
  }
  double penalty = 0.0;
  for (double w : wts.w1) penalty += w * w;
  for (double w : wts.w2) penalty += w * w;
  const double reg = alpha * inv_n;
  for (std::size_t i = 0; i < g.w1.size(); ++i) g.w1[i] += reg * wts.w1[i];
  for (std::size_t i = 0; i < g.w2.size(); ++i) g.w2[i] += reg * wts.w2[i];

  MlpLoss loss;
  loss.value = 0.5 * sse * inv_n + 0.5 * reg * penalty;
  loss.gradient = g.flatten();
  return loss;
}

MlpWeights init_mlp_weights(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
  MlpWeights w(inputs, hidden);
  auto rng = make_rng(seed, {kInitSalt});
  const double b_hidden = std::sqrt(2.0 / static_cast<double>(inputs + hidden));
  const double b_out = std::sqrt(2.0 / static_cast<double>(hidden + 1));
  std::uniform_real_distribution<double> u_hidden(-b_hidden, b_hidden);
  std::uniform_real_distribution<double> u_out(-b_out, b_out);
  for (auto& v : w.w1) v = u_hidden(rng);
  for (auto& v : w.b1) v = u_hidden(rng);
  for (auto& v : w.w2) v = u_out(rng);
  w.b2 = u_out(rng);
  return w;
}

MlpModel::MlpModel(MlpParams params, MlpWeights weights)
    : params_(params), weights_(std::move(weights)) {
  if (weights_.w1.size() != weights_.inputs * weights_.hidden ||
      weights_.b1.size() != weights_.hidden || weights_.w2.size() != weights_.hidden) {
    throw Error(ErrorCode::Schema, "mlp weight shapes are inconsistent");
  }
}

nlohmann::json MlpModel::state() const {
  return {{"b1", weights_.b1},         {"b2", weights_.b2},
          {"hidden", weights_.hidden}, {"inputs", weights_.inputs},
          {"w1", weights_.w1},         {"w2", weights_.w2}};
}

MlpModel MlpModel::from_state(const nlohmann::json& params, const nlohmann::json& state) {
  MlpWeights w;
  w.inputs = state.at("inputs").get<std::size_t>();
  w.hidden = state.at("hidden").get<std::size_t>();
  w.w1 = state.at("w1").get<std::vector<double>>();
  w.b1 = state.at("b1").get<std::vector<double>>();
  w.w2 = state.at("w2").get<std::vector<double>>();
  w.b2 = state.at("b2").get<double>();
  return MlpModel(MlpParams::from_json(params), std::move(w));
}

MlpModel fit_mlp(const Matrix& x, std::span<const double> y, const MlpParams& params,
                 std::uint64_t seed, MlpTrace* trace) {
  check_training_data(x, y);
  const std::size_t n = x.rows();

  // A constant target has the exact minimizer w = 0, output bias = y.
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
    MlpWeights constant(x.cols(), static_cast<std::size_t>(params.hidden));
    constant.b2 = y[0];
    if (trace) trace->best_iteration = 0;
    return MlpModel(params, std::move(constant));
  }

  // Hold out a validation split only when both sides stay non-empty.
  std::vector<std::size_t> train_idx(n), val_idx;
  std::iota(train_idx.begin(), train_idx.end(), 0);
  if (params.early_stopping) {
    const auto n_val = static_cast<std::size_t>(
        std::floor(params.validation_fraction * static_cast<double>(n)));
    if (n_val >= 1 && n_val < n) {
      auto rng = make_rng(seed, {kValidationSalt});
      std::shuffle(train_idx.begin(), train_idx.end(), rng);
      val_idx.assign(train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(n_val));
      train_idx.erase(train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(n_val));
      std::sort(train_idx.begin(), train_idx.end());
      std::sort(val_idx.begin(), val_idx.end());
    }
  }
  const Matrix x_train = x.select_rows(train_idx);
  const auto y_train = select(y, train_idx);
  const Matrix x_val = x.select_rows(val_idx);
  const auto y_val = select(y, val_idx);

  MlpWeights weights = init_mlp_weights(x.cols(), static_cast<std::size_t>(params.hidden), seed);
  MlpWeights best = weights;
  double best_val = std::numeric_limits<double>::infinity();
  int best_iter = -1, stale = 0;

  auto validation_loss = [&](const MlpWeights& w) {
    double sse = 0.0;
    for (std::size_t r = 0; r < x_val.rows(); ++r) {
      const double e = w.forward(x_val.row(r)) - y_val[r];
      sse += e * e;
    }
    return 0.5 * sse / static_cast<double>(x_val.rows());
  };

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto theta = weights.flatten();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
  const bool use_val = !val_idx.empty();

  for (int it = 0; it < params.max_iter; ++it) {
    weights.assign(theta);
    if (use_val) {
      const double val = validation_loss(weights);
      if (!std::isfinite(val)) throw Error(ErrorCode::NonFiniteLoss, "validation loss diverged");
      if (trace) trace->validation_curve.push_back(val);
      if (val < best_val - params.tol) {
        best_val = val;
        best = weights;
        best_iter = it;
        stale = 0;
      } else if (++stale >= params.n_iter_no_change) {
        break;
      }
    }
    const auto loss = mlp_loss_gradient(weights, x_train, y_train, params.alpha);
    if (!std::isfinite(loss.value)) {
      throw Error(ErrorCode::NonFiniteLoss,
                  "training loss became non-finite at iteration " + std::to_string(it));
    }
    if (trace) trace->loss_curve.push_back(loss.value);
    const double t = static_cast<double>(it + 1);
    const double lr = params.learning_rate_init * std::sqrt(1.0 - std::pow(kBeta2, t)) /
                      (1.0 - std::pow(kBeta1, t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = loss.gradient[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      theta[i] -= lr * m[i] / (std::sqrt(v[i]) + kEps);
    }
  }
  weights.assign(theta);
  if (use_val) {
    const double final_val = validation_loss(weights);
    if (final_val < best_val - params.tol || best_iter < 0) {
      best = weights;
      best_iter = params.max_iter;
    }
    weights = best;
  }
  if (trace) trace->best_iteration = best_iter;
  return MlpModel(params, std::move(weights));
}

}  // namespace qsat
