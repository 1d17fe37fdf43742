#include "qsat/learners/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qsat/error.hpp"
#include "qsat/learners/params.hpp"

namespace qsat {

KnnParams KnnParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  KnnParams p;
  p.n_neighbors = r.integer("n_neighbors", 15);
  p.p = r.number("p", 1.0);
  const auto w = r.text("weights", "distance");
  if (w == "uniform") {
    p.weights = KnnWeights::Uniform;
  } else if (w == "distance") {
    p.weights = KnnWeights::Distance;
  } else {
    r.fail("weights", "must be uniform or distance");
  }
  r.finish();
  if (p.n_neighbors < 1) r.fail("n_neighbors", "must be >= 1");
  if (!(p.p >= 1.0) || !std::isfinite(p.p)) r.fail("p", "must be a finite value >= 1");
  return p;
}

nlohmann::json KnnParams::to_json() const {
  const bool integral = p == std::floor(p);
  return {{"n_neighbors", n_neighbors},
          {"p", integral ? nlohmann::json(static_cast<int>(p)) : nlohmann::json(p)},
          {"weights", weights == KnnWeights::Uniform ? "uniform" : "distance"}};
}

double minkowski_distance(std::span<const double> a, std::span<const double> b, double p) {
  double sum = 0.0;
  if (p == 1.0) {
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum;
  }
  if (p == 2.0) {
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sum);
  }
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::pow(std::abs(a[i] - b[i]), p);
  return std::pow(sum, 1.0 / p);
}

KnnModel::KnnModel(KnnParams params, Matrix x, std::vector<double> y)
    : params_(params), x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.size() || x_.rows() == 0) {
    throw Error(ErrorCode::Schema, "knn state needs one target per stored row");
  }
  if (static_cast<std::size_t>(params_.n_neighbors) > x_.rows()) {
    throw Error(ErrorCode::InvalidArgument,
                "n_neighbors (" + std::to_string(params_.n_neighbors) +
                    ") exceeds the number of training rows (" + std::to_string(x_.rows()) + ")",
                "n_neighbors");
  }
}

std::vector<std::size_t> KnnModel::neighbors(std::span<const double> row) const {
  const std::size_t n = x_.rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = {minkowski_distance(row, x_.row(i), params_.p), i};
  const auto k = static_cast<std::size_t>(params_.n_neighbors);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

double KnnModel::predict_row(std::span<const double> row) const {
  const auto idx = neighbors(row);
  if (params_.weights == KnnWeights::Uniform) {
    double sum = 0.0;
    for (auto i : idx) sum += y_[i];
    return sum / static_cast<double>(idx.size());
  }
  double exact_sum = 0.0;
  std::size_t exact = 0;
  double num = 0.0, den = 0.0;
  for (auto i : idx) {
    const double d = minkowski_distance(row, x_.row(i), params_.p);
    if (d == 0.0) {
      exact_sum += y_[i];
      ++exact;
    } else {
      num += y_[i] / d;
      den += 1.0 / d;
    }
  }
  if (exact > 0) return exact_sum / static_cast<double>(exact);
  return num / den;
}

nlohmann::json KnnModel::state() const {
  return {{"rows", x_.rows()}, {"cols", x_.cols()}, {"x", x_.data()}, {"y", y_}};
}

KnnModel KnnModel::from_state(const nlohmann::json& params, const nlohmann::json& state) {
  Matrix x(state.at("rows").get<std::size_t>(), state.at("cols").get<std::size_t>(),
           state.at("x").get<std::vector<double>>());
  return KnnModel(KnnParams::from_json(params), std::move(x),
                  state.at("y").get<std::vector<double>>());
}

KnnModel fit_knn(const Matrix& x, std::span<const double> y, const KnnParams& params) {
  check_training_data(x, y);
  return KnnModel(params, x, std::vector<double>(y.begin(), y.end()));
}

}  // namespace qsat
