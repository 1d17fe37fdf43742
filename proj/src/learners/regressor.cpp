#include "qsat/learners/regressor.hpp"

#include <cmath>
#include <string>

#include "qsat/error.hpp"

namespace qsat {

namespace {

struct KindEntry {
  ModelKind kind;
  std::string_view name;
};

constexpr std::array<KindEntry, 10> kKindNames = {{
    {ModelKind::Knn, "knn"},
    {ModelKind::DecisionTree, "decision_tree"},
    {ModelKind::RandomForest, "random_forest"},
    {ModelKind::GradientBoosting, "gradient_boosting"},
    {ModelKind::RegularizedBoosting, "regularized_boosting"},
    {ModelKind::AdaBoostR2, "adaboost_r2"},
    {ModelKind::Ridge, "ridge"},
    {ModelKind::Lasso, "lasso"},
    {ModelKind::Svr, "svr"},
    {ModelKind::Mlp, "mlp"},
}};

void check_row(std::span<const double> row, std::size_t width) {
  if (row.size() != width) {
    throw Error(ErrorCode::WidthMismatch, "expected " + std::to_string(width) +
                                              " features, got " + std::to_string(row.size()));
  }
  for (double v : row) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite feature value");
  }
}

}  // namespace

std::string_view kind_name(ModelKind kind) {
  for (const auto& e : kKindNames) {
    if (e.kind == kind) return e.name;
  }
  return "unknown";
}

ModelKind parse_kind(std::string_view name) {
  for (const auto& e : kKindNames) {
    if (e.name == name) return e.kind;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(name) + "'",
              "kind");
}

bool is_tree_kind(ModelKind kind) {
  return kind == ModelKind::DecisionTree || kind == ModelKind::RandomForest ||
         kind == ModelKind::GradientBoosting || kind == ModelKind::RegularizedBoosting;
}

std::vector<double> Regressor::predict(const Matrix& x) const {
  if (x.cols() != feature_count()) {
    throw Error(ErrorCode::WidthMismatch, "expected " + std::to_string(feature_count()) +
                                              " features, got " + std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    check_row(x.row(r), feature_count());
    out[r] = predict_row(x.row(r));
  }
  return out;
}

double Regressor::predict_one(std::span<const double> row) const {
  check_row(row, feature_count());
  return predict_row(row);
}

void check_training_data(const Matrix& x, std::span<const double> y) {
  if (x.rows() == 0) throw Error(ErrorCode::InvalidArgument, "training set is empty");
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::InvalidArgument, "feature rows and targets differ in length");
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite target value");
  }
}

}  // namespace qsat
