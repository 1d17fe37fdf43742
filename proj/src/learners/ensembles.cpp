#include "qsat/learners/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qsat/error.hpp"
#include "qsat/learners/params.hpp"
#include "qsat/parallel.hpp"

namespace qsat {

namespace {

constexpr std::uint64_t kForestSalt = 0xf0;
constexpr std::uint64_t kSubsampleSalt = 0x5ab5;
constexpr std::uint64_t kStageTreeSalt = 0x57a6;
constexpr std::uint64_t kColsampleSalt = 0xc015;
constexpr std::uint64_t kAdaSalt = 0xada;

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

nlohmann::json depth_json(const std::optional<int>& depth) {
  return depth ? nlohmann::json(*depth) : nlohmann::json(nullptr);
}

void check_depth(ParamReader& r, const std::optional<int>& depth) {
  if (depth && *depth < 1) r.fail("max_depth", "must be >= 1 or null");
}

std::vector<RegressionTree> trees_from_json(const nlohmann::json& j) {
  std::vector<RegressionTree> trees;
  for (const auto& t : j) trees.push_back(RegressionTree::from_json(t));
  return trees;
}

nlohmann::json trees_to_json(const std::vector<RegressionTree>& trees) {
  auto arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(t.to_json());
  return arr;
}

/// Rows used by boosting stage `stage`: all of them, or a sorted sample of
/// max(1, floor(subsample * n)) drawn without replacement.
std::vector<std::size_t> stage_rows(std::size_t n, double subsample, std::uint64_t seed,
                                    std::size_t stage) {
  auto rows = all_indices(n);
  if (subsample >= 1.0) return rows;
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(subsample * static_cast<double>(n))));
  auto rng = make_rng(seed, {kSubsampleSalt, stage});
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(keep);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Random forest

RandomForestParams RandomForestParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  RandomForestParams p;
  if (r.text("criterion", "squared_error") != "squared_error") {
    r.fail("criterion", "only squared_error is supported");
  }
  p.n_estimators = r.integer("n_estimators", 200);
  p.max_depth = r.optional_integer("max_depth", std::nullopt);
  const auto* mf = r.raw("max_features");
  p.max_features = mf ? parse_max_features(mf) : MaxFeatures::Sqrt;
  p.min_samples_leaf = r.integer("min_samples_leaf", 1);
  p.min_samples_split = r.integer("min_samples_split", 2);
  p.bootstrap = r.boolean("bootstrap", true);
  r.finish();
  if (p.n_estimators < 1) r.fail("n_estimators", "must be >= 1");
  check_depth(r, p.max_depth);
  if (p.min_samples_split < 2) r.fail("min_samples_split", "must be >= 2");
  if (p.min_samples_leaf < 1) r.fail("min_samples_leaf", "must be >= 1");
  return p;
}

nlohmann::json RandomForestParams::to_json() const {
  return {{"bootstrap", bootstrap},
          {"max_depth", depth_json(max_depth)},
          {"max_features", max_features_json(max_features)},
          {"min_samples_leaf", min_samples_leaf},
          {"min_samples_split", min_samples_split},
          {"n_estimators", n_estimators}};
}

double RandomForestModel::predict_row(std::span<const double> row) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict_row(row);
  return sum / static_cast<double>(trees_.size());
}

nlohmann::json RandomForestModel::state() const {
  return {{"feature_count", features_}, {"trees", trees_to_json(trees_)}};
}

RandomForestModel RandomForestModel::from_state(const nlohmann::json& params,
                                                const nlohmann::json& state) {
  auto trees = trees_from_json(state.at("trees"));
  if (trees.empty()) throw Error(ErrorCode::Schema, "forest has no trees");
  return RandomForestModel(RandomForestParams::from_json(params), std::move(trees),
                           state.at("feature_count").get<std::size_t>());
}

RandomForestModel fit_random_forest(const Matrix& x, std::span<const double> y,
                                    const RandomForestParams& params, std::uint64_t seed) {
  check_training_data(x, y);
  TreeGrowConfig cfg;
  cfg.max_depth = params.max_depth;
  cfg.min_samples_split = params.min_samples_split;
  cfg.min_samples_leaf = params.min_samples_leaf;
  cfg.max_features = resolve_max_features(params.max_features, x.cols());

  std::vector<RegressionTree> trees(static_cast<std::size_t>(params.n_estimators));
  const std::size_t n = x.rows();
  parallel_for(trees.size(), [&](std::size_t t) {
    auto rng = make_rng(seed, {kForestSalt, t});
    std::vector<std::size_t> rows;
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      rows.resize(n);
      for (auto& r : rows) r = pick(rng);
      std::sort(rows.begin(), rows.end());
    } else {
      rows = all_indices(n);
    }
    trees[t] = fit_cart(x, y, rows, cfg, rng);
  });
  return RandomForestModel(params, std::move(trees), x.cols());
}

// ---------------------------------------------------------------------------
// Boosting

double BoostedTrees::predict_row(std::span<const double> row, std::size_t stages) const {
  double f = base_;
  const std::size_t m = std::min(stages, trees_.size());
  for (std::size_t i = 0; i < m; ++i) f += learning_rate_ * trees_[i].predict_row(row);
  return f;
}

nlohmann::json BoostedTrees::to_json() const {
  return {{"base", base_}, {"learning_rate", learning_rate_}, {"trees", trees_to_json(trees_)}};
}

BoostedTrees BoostedTrees::from_json(const nlohmann::json& j) {
  return BoostedTrees(j.at("base").get<double>(), j.at("learning_rate").get<double>(),
                      trees_from_json(j.at("trees")));
}

namespace {

void check_boosting_common(ParamReader& r, double learning_rate, double subsample,
                           int n_estimators, const std::optional<int>& depth, int mss, int msl) {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    r.fail("learning_rate", "must lie in (0, 1]");
  }
  if (!(subsample > 0.0 && subsample <= 1.0)) r.fail("subsample", "must lie in (0, 1]");
  if (n_estimators < 0) r.fail("n_estimators", "must be >= 0");
  check_depth(r, depth);
  if (mss < 2) r.fail("min_samples_split", "must be >= 2");
  if (msl < 1) r.fail("min_samples_leaf", "must be >= 1");
}

struct BoostingSetup {
  TreeGrowConfig tree;
  double learning_rate;
  int n_estimators;
  double subsample;
  double colsample;
};

BoostedTrees boost(const Matrix& x, std::span<const double> y, const BoostingSetup& setup,
                   std::uint64_t seed) {
  check_training_data(x, y);
  const std::size_t n = x.rows();
  const double base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> f(n, base), grad(n), hess(n, 1.0);
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(setup.n_estimators));

  for (std::size_t m = 0; m < static_cast<std::size_t>(setup.n_estimators); ++m) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = f[i] - y[i];
    const auto rows = stage_rows(n, setup.subsample, seed, m);

    auto features = all_indices(x.cols());
    if (setup.colsample < 1.0) {
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::floor(setup.colsample * static_cast<double>(x.cols()))));
      auto rng = make_rng(seed, {kColsampleSalt, m});
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(keep);
      std::sort(features.begin(), features.end());
    }

    auto rng = make_rng(seed, {kStageTreeSalt, m});
    trees.push_back(grow_tree(x, grad, hess, rows, features, setup.tree, rng));
    const auto& tree = trees.back();
    for (std::size_t i = 0; i < n; ++i) f[i] += setup.learning_rate * tree.predict_row(x.row(i));
  }
  return BoostedTrees(base, setup.learning_rate, std::move(trees));
}

std::vector<double> staged(const BoostedTrees& e, const Matrix& x, std::size_t stages) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = e.predict_row(x.row(r), stages);
  return out;
}

}  // namespace

GradientBoostingParams GradientBoostingParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  GradientBoostingParams p;
  p.learning_rate = r.number("learning_rate", 0.1);
  if (r.text("loss", "squared_error") != "squared_error") {
    r.fail("loss", "only squared_error is supported");
  }
  p.max_depth = r.optional_integer("max_depth", 7);
  p.n_estimators = r.integer("n_estimators", 200);
  p.subsample = r.number("subsample", 0.8);
  p.min_samples_split = r.integer("min_samples_split", 2);
  p.min_samples_leaf = r.integer("min_samples_leaf", 1);
  r.finish();
  check_boosting_common(r, p.learning_rate, p.subsample, p.n_estimators, p.max_depth,
                        p.min_samples_split, p.min_samples_leaf);
  return p;
}

nlohmann::json GradientBoostingParams::to_json() const {
  return {{"learning_rate", learning_rate},
          {"loss", "squared_error"},
          {"max_depth", depth_json(max_depth)},
          {"min_samples_leaf", min_samples_leaf},
          {"min_samples_split", min_samples_split},
          {"n_estimators", n_estimators},
          {"subsample", subsample}};
}

RegularizedBoostingParams RegularizedBoostingParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  RegularizedBoostingParams p;
  p.colsample_bytree = r.number("colsample_bytree", 1.0);
  p.learning_rate = r.number("learning_rate", 0.1);
  p.max_depth = r.optional_integer("max_depth", 7);
  p.n_estimators = r.integer("n_estimators", 200);
  p.reg_alpha = r.number("reg_alpha", 0.0);
  p.reg_lambda = r.number("reg_lambda", 1.5);
  p.subsample = r.number("subsample", 0.8);
  p.min_samples_split = r.integer("min_samples_split", 2);
  p.min_samples_leaf = r.integer("min_samples_leaf", 1);
  r.finish();
  check_boosting_common(r, p.learning_rate, p.subsample, p.n_estimators, p.max_depth,
                        p.min_samples_split, p.min_samples_leaf);
  if (!(p.colsample_bytree > 0.0 && p.colsample_bytree <= 1.0)) {
    r.fail("colsample_bytree", "must lie in (0, 1]");
  }
  if (!(p.reg_alpha >= 0.0)) r.fail("reg_alpha", "must be >= 0");
  if (!(p.reg_lambda >= 0.0)) r.fail("reg_lambda", "must be >= 0");
  return p;
}

nlohmann::json RegularizedBoostingParams::to_json() const {
  return {{"colsample_bytree", colsample_bytree},
          {"learning_rate", learning_rate},
          {"max_depth", depth_json(max_depth)},
          {"min_samples_leaf", min_samples_leaf},
          {"min_samples_split", min_samples_split},
          {"n_estimators", n_estimators},
          {"reg_alpha", reg_alpha},
          {"reg_lambda", reg_lambda},
          {"subsample", subsample}};
}

nlohmann::json GradientBoostingModel::state() const {
  return {{"feature_count", features_}, {"ensemble", ensemble_.to_json()}};
}

GradientBoostingModel GradientBoostingModel::from_state(const nlohmann::json& params,
                                                        const nlohmann::json& state) {
  return GradientBoostingModel(GradientBoostingParams::from_json(params),
                               BoostedTrees::from_json(state.at("ensemble")),
                               state.at("feature_count").get<std::size_t>());
}

std::vector<double> GradientBoostingModel::predict_stages(const Matrix& x,
                                                          std::size_t stages) const {
  return staged(ensemble_, x, stages);
}

nlohmann::json RegularizedBoostingModel::state() const {
  return {{"feature_count", features_}, {"ensemble", ensemble_.to_json()}};
}

RegularizedBoostingModel RegularizedBoostingModel::from_state(const nlohmann::json& params,
                                                              const nlohmann::json& state) {
  return RegularizedBoostingModel(RegularizedBoostingParams::from_json(params),
                                  BoostedTrees::from_json(state.at("ensemble")),
                                  state.at("feature_count").get<std::size_t>());
}

std::vector<double> RegularizedBoostingModel::predict_stages(const Matrix& x,
                                                             std::size_t stages) const {
  return staged(ensemble_, x, stages);
}

GradientBoostingModel fit_gradient_boosting(const Matrix& x, std::span<const double> y,
                                            const GradientBoostingParams& params,
                                            std::uint64_t seed) {
  BoostingSetup setup;
  setup.tree.max_depth = params.max_depth;
  setup.tree.min_samples_split = params.min_samples_split;
  setup.tree.min_samples_leaf = params.min_samples_leaf;
  setup.learning_rate = params.learning_rate;
  setup.n_estimators = params.n_estimators;
  setup.subsample = params.subsample;
  setup.colsample = 1.0;
  return GradientBoostingModel(params, boost(x, y, setup, seed), x.cols());
}

RegularizedBoostingModel fit_regularized_boosting(const Matrix& x, std::span<const double> y,
                                                  const RegularizedBoostingParams& params,
                                                  std::uint64_t seed) {
  BoostingSetup setup;
  setup.tree.max_depth = params.max_depth;
  setup.tree.min_samples_split = params.min_samples_split;
  setup.tree.min_samples_leaf = params.min_samples_leaf;
  setup.tree.reg_lambda = params.reg_lambda;
  setup.tree.reg_alpha = params.reg_alpha;
  setup.learning_rate = params.learning_rate;
  setup.n_estimators = params.n_estimators;
  setup.subsample = params.subsample;
  setup.colsample = params.colsample_bytree;
  return RegularizedBoostingModel(params, boost(x, y, setup, seed), x.cols());
}

// ---------------------------------------------------------------------------
// AdaBoost.R2

namespace {

std::string ada_loss_name(AdaLoss loss) {
  switch (loss) {
    case AdaLoss::Linear: return "linear";
    case AdaLoss::Square: return "square";
    case AdaLoss::Exponential: return "exponential";
  }
  return "square";
}

}  // namespace

AdaBoostParams AdaBoostParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  AdaBoostParams p;
  p.learning_rate = r.number("learning_rate", 0.05);
  const auto loss = r.text("loss", "square");
  if (loss == "linear") {
    p.loss = AdaLoss::Linear;
  } else if (loss == "square") {
    p.loss = AdaLoss::Square;
  } else if (loss == "exponential") {
    p.loss = AdaLoss::Exponential;
  } else {
    r.fail("loss", "must be linear, square or exponential");
  }
  p.n_estimators = r.integer("n_estimators", 100);
  p.max_depth = r.integer("max_depth", 3);
  r.finish();
  if (!(p.learning_rate > 0.0)) r.fail("learning_rate", "must be > 0");
  if (p.n_estimators < 1) r.fail("n_estimators", "must be >= 1");
  if (p.max_depth < 1) r.fail("max_depth", "must be >= 1");
  return p;
}

nlohmann::json AdaBoostParams::to_json() const {
  return {{"learning_rate", learning_rate},
          {"loss", ada_loss_name(loss)},
          {"max_depth", max_depth},
          {"n_estimators", n_estimators}};
}

AdaBoostModel::AdaBoostModel(AdaBoostParams params, std::vector<RegressionTree> trees,
                             std::vector<double> weights, std::size_t features)
    : params_(params), trees_(std::move(trees)), weights_(std::move(weights)),
      features_(features) {
  if (trees_.empty() || trees_.size() != weights_.size()) {
    throw Error(ErrorCode::Schema, "adaboost needs one weight per member tree");
  }
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  double cumulative = 0.0;
  for (auto i : order) {
    cumulative += weights[i];
    if (cumulative >= 0.5 * total) return values[i];
  }
  return values[order.back()];
}

double AdaBoostModel::predict_row(std::span<const double> row) const {
  std::vector<double> preds(trees_.size());
  for (std::size_t i = 0; i < trees_.size(); ++i) preds[i] = trees_[i].predict_row(row);
  return weighted_median(preds, weights_);
}

nlohmann::json AdaBoostModel::state() const {
  return {{"feature_count", features_},
          {"trees", trees_to_json(trees_)},
          {"estimator_weights", weights_}};
}

AdaBoostModel AdaBoostModel::from_state(const nlohmann::json& params,
                                        const nlohmann::json& state) {
  return AdaBoostModel(AdaBoostParams::from_json(params), trees_from_json(state.at("trees")),
                       state.at("estimator_weights").get<std::vector<double>>(),
                       state.at("feature_count").get<std::size_t>());
}

AdaBoostModel fit_adaboost_r2(const Matrix& x, std::span<const double> y,
                              const AdaBoostParams& params, std::uint64_t seed,
                              AdaBoostTrace* trace) {
  check_training_data(x, y);
  const std::size_t n = x.rows();
  TreeGrowConfig cfg;
  cfg.max_depth = params.max_depth;

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<RegressionTree> trees;
  std::vector<double> estimator_weights;
  std::vector<double> cdf(n), error(n), loss(n);

  for (std::size_t round = 0; round < static_cast<std::size_t>(params.n_estimators); ++round) {
    // Weighted bootstrap resample of size n.
    auto rng = make_rng(seed, {kAdaSalt, round});
    std::partial_sum(w.begin(), w.end(), cdf.begin());
    std::uniform_real_distribution<double> unit(0.0, cdf.back());
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) {
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), unit(rng));
      r = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), n - 1);
    }
    std::sort(rows.begin(), rows.end());
    auto tree = fit_cart(x, y, rows, cfg, rng);

    double max_error = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      error[i] = std::abs(tree.predict_row(x.row(i)) - y[i]);
      max_error = std::max(max_error, error[i]);
    }

    AdaBoostRound record;
    if (trace) record.sample_weights = w;

    if (max_error == 0.0) {
      // Perfect fit: keep it with unit weight and stop.
      record.estimator_weight = 1.0;
      if (trace) trace->rounds.push_back(std::move(record));
      trees.push_back(std::move(tree));
      estimator_weights.push_back(1.0);
      break;
    }

    double average = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double rel = error[i] / max_error;
      switch (params.loss) {
        case AdaLoss::Linear: loss[i] = rel; break;
        case AdaLoss::Square: loss[i] = rel * rel; break;
        case AdaLoss::Exponential: loss[i] = 1.0 - std::exp(-rel); break;
      }
      average += w[i] * loss[i];
    }
    record.losses = loss;
    record.average_loss = average;

    if (average >= 0.5) {
      // Worse than chance: stop. The first round is kept so the model is
      // never empty.
      record.kept = trees.empty();
      if (trees.empty()) {
        trees.push_back(std::move(tree));
        estimator_weights.push_back(1.0);
        record.estimator_weight = 1.0;
      }
      if (trace) trace->rounds.push_back(std::move(record));
      break;
    }

    const double beta = average / (1.0 - average);
    const double estimator_weight = params.learning_rate * std::log(1.0 / beta);
    record.beta = beta;
    record.estimator_weight = estimator_weight;
    if (trace) trace->rounds.push_back(std::move(record));
    trees.push_back(std::move(tree));
    estimator_weights.push_back(estimator_weight);

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::pow(beta, params.learning_rate * (1.0 - loss[i]));
      total += w[i];
    }
    if (!(total > 0.0)) break;
    for (auto& v : w) v /= total;
  }
  return AdaBoostModel(params, std::move(trees), std::move(estimator_weights), x.cols());
}

}  // namespace qsat
