#include "qsat/learners/factory.hpp"

#include "qsat/error.hpp"
#include "qsat/learners/ensembles.hpp"
#include "qsat/learners/knn.hpp"
#include "qsat/learners/linear.hpp"
#include "qsat/learners/mlp.hpp"
#include "qsat/learners/svr.hpp"
#include "qsat/learners/tree.hpp"

namespace qsat {

namespace {

template <typename Model>
RegressorPtr share(Model&& model) {
  return std::make_shared<const std::decay_t<Model>>(std::forward<Model>(model));
}

}  // namespace

RegressorPtr fit_regressor(ModelKind kind, const Matrix& x, std::span<const double> y,
                           const nlohmann::json& params, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::Knn: return share(fit_knn(x, y, KnnParams::from_json(params)));
    case ModelKind::DecisionTree:
      return share(fit_decision_tree(x, y, DecisionTreeParams::from_json(params), seed));
    case ModelKind::RandomForest:
      return share(fit_random_forest(x, y, RandomForestParams::from_json(params), seed));
    case ModelKind::GradientBoosting:
      return share(fit_gradient_boosting(x, y, GradientBoostingParams::from_json(params), seed));
    case ModelKind::RegularizedBoosting:
      return share(
          fit_regularized_boosting(x, y, RegularizedBoostingParams::from_json(params), seed));
    case ModelKind::AdaBoostR2:
      return share(fit_adaboost_r2(x, y, AdaBoostParams::from_json(params), seed));
    case ModelKind::Ridge: return share(fit_ridge(x, y, RidgeParams::from_json(params)));
    case ModelKind::Lasso: return share(fit_lasso(x, y, LassoParams::from_json(params)));
    case ModelKind::Svr: return share(fit_svr(x, y, SvrParams::from_json(params)));
    case ModelKind::Mlp: return share(fit_mlp(x, y, MlpParams::from_json(params), seed));
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled model kind");
}

nlohmann::json regressor_to_json(const Regressor& model) {
  return {{"hyperparams", model.hyperparams()},
          {"kind", std::string(kind_name(model.kind()))},
          {"state", model.state()}};
}

RegressorPtr regressor_from_json(const nlohmann::json& j) {
  try {
    const auto kind = parse_kind(j.at("kind").get<std::string>());
    const auto& p = j.at("hyperparams");
    const auto& s = j.at("state");
    switch (kind) {
      case ModelKind::Knn: return share(KnnModel::from_state(p, s));
      case ModelKind::DecisionTree: return share(DecisionTreeModel::from_state(p, s));
      case ModelKind::RandomForest: return share(RandomForestModel::from_state(p, s));
      case ModelKind::GradientBoosting: return share(GradientBoostingModel::from_state(p, s));
      case ModelKind::RegularizedBoosting:
        return share(RegularizedBoostingModel::from_state(p, s));
      case ModelKind::AdaBoostR2: return share(AdaBoostModel::from_state(p, s));
      case ModelKind::Ridge:
      case ModelKind::Lasso: return share(LinearModel::from_state(kind, p, s));
      case ModelKind::Svr: return share(SvrModel::from_state(p, s));
      case ModelKind::Mlp: return share(MlpModel::from_state(p, s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("malformed model entry: ") + e.what());
  }
  throw Error(ErrorCode::Schema, "unhandled model kind");
}

nlohmann::json default_params(ModelKind kind) {
  using nlohmann::json;
  switch (kind) {
    case ModelKind::Knn: return {{"n_neighbors", 15}, {"p", 1}, {"weights", "distance"}};
    case ModelKind::DecisionTree:
      return {{"criterion", "squared_error"}, {"max_depth", nullptr}, {"max_features", "sqrt"},
              {"min_samples_leaf", 1},         {"min_samples_split", 2}};
    case ModelKind::RandomForest:
      return {{"max_features", "sqrt"}, {"n_estimators", 200}};
    case ModelKind::GradientBoosting:
      return {{"learning_rate", 0.1}, {"loss", "squared_error"}, {"max_depth", 7},
              {"n_estimators", 200},  {"subsample", 0.8}};
    case ModelKind::RegularizedBoosting:
      return {{"colsample_bytree", 1.0}, {"learning_rate", 0.1}, {"max_depth", 7},
              {"n_estimators", 200},     {"reg_alpha", 0},       {"reg_lambda", 1.5},
              {"subsample", 0.8}};
    case ModelKind::AdaBoostR2:
      return {{"learning_rate", 0.05}, {"loss", "square"}, {"n_estimators", 100}};
    case ModelKind::Ridge: return {{"alpha", 50.0}};
    case ModelKind::Lasso: return {{"alpha", 0.01}};
    case ModelKind::Svr:
      return {{"C", 10.0}, {"degree", 2}, {"gamma", "scale"}, {"kernel", "rbf"}};
    case ModelKind::Mlp:
      return {{"activation", "logistic"},
              {"alpha", 0.01},
              {"early_stopping", true},
              {"hidden_layer_sizes", json::array({30})},
              {"learning_rate", "constant"},
              {"solver", "adam"}};
  }
  return json::object();
}

nlohmann::json default_grid(ModelKind kind) {
  using nlohmann::json;
  switch (kind) {
    case ModelKind::Knn:
      return {{"n_neighbors", {5, 10, 15}}, {"p", {1, 2}}, {"weights", {"uniform", "distance"}}};
    case ModelKind::DecisionTree:
      return {{"criterion", {"squared_error"}},
              {"max_depth", {json(5), json(nullptr)}},
              {"max_features", {"sqrt", "all"}},
              {"min_samples_leaf", {1, 2}},
              {"min_samples_split", {2}}};
    case ModelKind::RandomForest:
      return {{"max_features", {"sqrt"}},
              {"min_samples_leaf", {1, 2}},
              {"n_estimators", {200}}};
    case ModelKind::GradientBoosting:
      return {{"learning_rate", {0.05, 0.1}},
              {"loss", {"squared_error"}},
              {"max_depth", {3, 7}},
              {"n_estimators", {200}},
              {"subsample", {0.8}}};
    case ModelKind::RegularizedBoosting:
      return {{"colsample_bytree", {1.0}}, {"learning_rate", {0.1}}, {"max_depth", {3, 7}},
              {"n_estimators", {200}},     {"reg_alpha", {0}},       {"reg_lambda", {1.0, 1.5}},
              {"subsample", {0.8}}};
    case ModelKind::AdaBoostR2:
      return {{"learning_rate", {0.05, 0.1}}, {"loss", {"square"}}, {"n_estimators", {100}}};
    case ModelKind::Ridge: return {{"alpha", {1.0, 10.0, 50.0}}};
    case ModelKind::Lasso: return {{"alpha", {0.001, 0.01, 0.1}}};
    case ModelKind::Svr:
      return {{"C", {1.0, 10.0}}, {"degree", {2}}, {"gamma", {"scale"}}, {"kernel", {"rbf"}}};
    case ModelKind::Mlp:
      return {{"activation", {"logistic"}},
              {"alpha", {0.001, 0.01}},
              {"early_stopping", {true}},
              {"hidden_layer_sizes", json::array({json::array({30})})},
              {"learning_rate", {"constant"}},
              {"solver", {"adam"}}};
  }
  return json::object();
}

nlohmann::json default_grids() {
  nlohmann::json out = nlohmann::json::object();
  for (auto kind : kCoreKinds) out[std::string(kind_name(kind))] = default_grid(kind);
  out["lasso"] = default_grid(ModelKind::Lasso);
  return out;
}

}  // namespace qsat
