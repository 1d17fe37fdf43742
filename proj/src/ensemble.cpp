#include "qsat/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qsat/error.hpp"
#include "qsat/learners/factory.hpp"
#include "qsat/parallel.hpp"
#include "qsat/random.hpp"

namespace qsat {

namespace {

constexpr std::uint64_t kOofSalt = 0x00f;
constexpr std::uint64_t kBaseRefitSalt = 0xba5e;

MetaKind parse_meta(const std::string& s) {
  if (s == "linear") return MetaKind::Linear;
  if (s == "elastic_net") return MetaKind::ElasticNet;
  throw Error(ErrorCode::Schema, "unknown meta-learner '" + s + "'", "meta");
}

}  // namespace

std::string to_string(MetaKind meta) {
  return meta == MetaKind::Linear ? "linear" : "elastic_net";
}

Matrix build_oof_matrix(const Matrix& x, std::span<const double> y,
                        std::span<const BaseFitter> fitters, const FoldPlan& plan,
                        std::uint64_t seed) {
  if (plan.assignment.size() != x.rows() || x.rows() != y.size()) {
    throw Error(ErrorCode::InvalidArgument, "fold plan does not match the training rows");
  }
  const std::size_t k = plan.k, m = fitters.size();
  for (auto s : plan.fold_sizes()) {
    if (s < 1) throw Error(ErrorCode::InvalidArgument, "a fold has no records");
  }
  std::vector<std::vector<std::size_t>> train_idx(k), test_idx(k);
  for (std::size_t f = 0; f < k; ++f) {
    train_idx[f] = plan.train_indices(f);
    test_idx[f] = plan.test_indices(f);
  }
  Matrix oof(x.rows(), m);
  parallel_for(k * m, [&](std::size_t job) {
    const std::size_t j = job / k, f = job % k;
    const Matrix xt = x.select_rows(train_idx[f]);
    const auto yt = select(y, train_idx[f]);
    const auto model = fitters[j](xt, yt, derive_seed(seed, {kOofSalt, j, f}));
    const auto pred = model->predict(x.select_rows(test_idx[f]));
    for (std::size_t i = 0; i < test_idx[f].size(); ++i) oof(test_idx[f][i], j) = pred[i];
  });
  return oof;
}

nlohmann::json StackingConfig::to_json() const {
  auto kinds = nlohmann::json::array();
  for (auto k : base_kinds) kinds.push_back(std::string(kind_name(k)));
  return {{"base_kinds", kinds},
          {"elastic_alpha", elastic_alpha},
          {"elastic_l1_ratio", elastic_l1_ratio},
          {"folds", folds},
          {"meta", to_string(meta)},
          {"seed", seed}};
}

StackedModel::StackedModel(std::vector<std::string> base_names, std::vector<RegressorPtr> bases,
                           MetaKind meta, LinearFit meta_fit, std::size_t folds,
                           std::uint64_t seed)
    : names_(std::move(base_names)), bases_(std::move(bases)), meta_(meta),
      meta_fit_(std::move(meta_fit)), folds_(folds), seed_(seed) {
  if (names_.size() != bases_.size() || bases_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "stacking needs one name per base model");
  }
  if (meta_fit_.coef.size() != bases_.size()) {
    throw Error(ErrorCode::WidthMismatch, "meta-learner width differs from the base count");
  }
  if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size()) {
    throw Error(ErrorCode::InvalidArgument, "base kinds must be distinct", "base_kinds");
  }
}

std::vector<double> StackedModel::predict(const Matrix& x) const {
  Matrix base_preds(x.rows(), bases_.size());
  for (std::size_t j = 0; j < bases_.size(); ++j) {
    const auto p = bases_[j]->predict(x);
    for (std::size_t i = 0; i < x.rows(); ++i) base_preds(i, j) = p[i];
  }
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = meta_fit_.predict(base_preds.row(i));
  return out;
}

double StackedModel::predict_one(std::span<const double> row) const {
  std::vector<double> base_preds(bases_.size());
  for (std::size_t j = 0; j < bases_.size(); ++j) base_preds[j] = bases_[j]->predict_one(row);
  return meta_fit_.predict(base_preds);
}

nlohmann::json StackedModel::to_json() const {
  auto bases = nlohmann::json::array();
  for (const auto& b : bases_) bases.push_back(regressor_to_json(*b));
  return {{"base_names", names_},
          {"bases", bases},
          {"folds", folds_},
          {"meta", to_string(meta_)},
          {"meta_coef", meta_fit_.coef},
          {"meta_intercept", meta_fit_.intercept},
          {"seed", seed_}};
}

StackedModel StackedModel::from_json(const nlohmann::json& j) {
  std::vector<RegressorPtr> bases;
  for (const auto& b : j.at("bases")) bases.push_back(regressor_from_json(b));
  LinearFit fit;
  fit.coef = j.at("meta_coef").get<std::vector<double>>();
  fit.intercept = j.at("meta_intercept").get<double>();
  return StackedModel(j.at("base_names").get<std::vector<std::string>>(), std::move(bases),
                      parse_meta(j.at("meta").get<std::string>()), std::move(fit),
                      j.at("folds").get<std::size_t>(), j.at("seed").get<std::uint64_t>());
}

StackingFit fit_stacked(const Matrix& x, std::span<const double> y,
                        const std::vector<std::string>& names,
                        std::span<const BaseFitter> fitters, MetaKind meta,
                        const StackingConfig& config) {
  check_training_data(x, y);
  if (names.size() != fitters.size() || fitters.empty()) {
    throw Error(ErrorCode::InvalidArgument, "stacking needs one name per base fitter");
  }
  if (std::set<std::string>(names.begin(), names.end()).size() != names.size()) {
    throw Error(ErrorCode::InvalidArgument, "base kinds must be distinct", "base_kinds");
  }
  const auto plan = kfold_split(x.rows(), config.folds, config.seed);
  Matrix oof = build_oof_matrix(x, y, fitters, plan, config.seed);

  LinearFit meta_fit;
  if (meta == MetaKind::Linear) {
    meta_fit = solve_least_squares(oof, y, 1e-8);
  } else {
    ElasticNetOptions opt;
    opt.alpha = config.elastic_alpha;
    opt.l1_ratio = config.elastic_l1_ratio;
    meta_fit = solve_elastic_net(oof, y, opt);
  }

  std::vector<RegressorPtr> bases(fitters.size());
  parallel_for(fitters.size(), [&](std::size_t j) {
    bases[j] = fitters[j](x, y, derive_seed(config.seed, {kBaseRefitSalt, j}));
  });
  return {StackedModel(names, std::move(bases), meta, std::move(meta_fit), config.folds,
                       config.seed),
          std::move(oof)};
}

StackingFit fit_stacked(const Matrix& x, std::span<const double> y, const StackingConfig& config) {
  std::vector<std::string> names;
  std::vector<BaseFitter> fitters;
  for (auto kind : config.base_kinds) {
    names.emplace_back(kind_name(kind));
    const auto it = config.base_params.find(kind);
    const auto params = it != config.base_params.end() ? it->second : default_params(kind);
    fitters.push_back([kind, params](const Matrix& xs, std::span<const double> ys,
                                     std::uint64_t s) {
      return fit_regressor(kind, xs, ys, params, s);
    });
  }
  return fit_stacked(x, y, names, fitters, config.meta, config);
}

double ensemble_average(const std::map<ModelKind, double>& per_model) {
  for (auto kind : kCoreKinds) {
    if (!per_model.contains(kind)) {
      throw Error(ErrorCode::MissingModel,
                  "ensemble average needs a prediction from " + std::string(kind_name(kind)),
                  std::string(kind_name(kind)));
    }
  }
  if (per_model.size() != kCoreKinds.size()) {
    throw Error(ErrorCode::InvalidArgument, "ensemble average takes exactly the nine core kinds");
  }
  double sum = 0.0;
  for (auto kind : kCoreKinds) sum += per_model.at(kind);
  return sum / static_cast<double>(kCoreKinds.size());
}

std::vector<double> ensemble_log_prediction(const std::map<ModelKind, RegressorPtr>& models,
                                            const Matrix& x) {
  std::vector<double> sum(x.rows(), 0.0);
  for (auto kind : kCoreKinds) {
    const auto it = models.find(kind);
    if (it == models.end() || !it->second) {
      throw Error(ErrorCode::MissingModel, "missing model " + std::string(kind_name(kind)),
                  std::string(kind_name(kind)));
    }
    const auto pred = it->second->predict(x);
    for (std::size_t i = 0; i < pred.size(); ++i) sum[i] += std::exp(pred[i]);
  }
  for (auto& v : sum) v = std::log(v / static_cast<double>(kCoreKinds.size()));
  return sum;
}

}  // namespace qsat
