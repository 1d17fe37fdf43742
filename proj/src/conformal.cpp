#include "qsat/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsat/error.hpp"

namespace qsat {

ConformalCalibration::ConformalCalibration(std::vector<double> scores, std::string protocol)
    : scores_(std::move(scores)), protocol_(std::move(protocol)) {
  if (scores_.empty()) throw Error(ErrorCode::InvalidArgument, "calibration set is empty");
  for (double s : scores_) {
    if (!std::isfinite(s) || s < 0.0) {
      throw Error(ErrorCode::NonFiniteInput, "calibration scores must be finite and >= 0");
    }
  }
  std::sort(scores_.begin(), scores_.end());
}

std::size_t ConformalCalibration::rank(double alpha) const {
  const double n = static_cast<double>(scores_.size());
  // Guard against (n+1)(1-alpha) landing a hair above an integer.
  const double raw = (n + 1.0) * (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

double ConformalCalibration::quantile(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::Validation, "alpha must lie strictly between 0 and 1", "alpha");
  }
  const auto r = rank(alpha);
  if (r > scores_.size()) return std::numeric_limits<double>::infinity();
  return scores_[std::max<std::size_t>(r, 1) - 1];
}

nlohmann::json ConformalCalibration::to_json() const {
  return {{"n_cal", scores_.size()}, {"protocol", protocol_}, {"scores", scores_}};
}

ConformalCalibration ConformalCalibration::from_json(const nlohmann::json& j) {
  auto scores = j.at("scores").get<std::vector<double>>();
  if (!std::is_sorted(scores.begin(), scores.end())) {
    throw Error(ErrorCode::Schema, "calibration scores must be sorted", "/conformal/scores");
  }
  return ConformalCalibration(std::move(scores), j.at("protocol").get<std::string>());
}

ConformalCalibration calibrate(std::span<const double> y_log, std::span<const double> y_hat_log,
                               std::string protocol) {
  if (y_log.size() != y_hat_log.size()) {
    throw Error(ErrorCode::InvalidArgument, "targets and predictions differ in length");
  }
  std::vector<double> scores(y_log.size());
  for (std::size_t i = 0; i < y_log.size(); ++i) scores[i] = std::abs(y_log[i] - y_hat_log[i]);
  return ConformalCalibration(std::move(scores), std::move(protocol));
}

ConformalCalibration calibrate(const Regressor& model, const Matrix& x,
                               std::span<const double> y_log, std::string protocol) {
  return calibrate(y_log, model.predict(x), std::move(protocol));
}

bool PredictionInterval::contains(double value) const {
  return value >= lower && (!upper || value <= *upper);
}

nlohmann::json PredictionInterval::to_json() const {
  return {{"alpha", alpha},
          {"lower", lower},
          {"upper", upper ? nlohmann::json(*upper) : nlohmann::json(nullptr)}};
}

PredictionInterval predict_interval(const ConformalCalibration& cal, double y_hat_log,
                                    double alpha) {
  if (!std::isfinite(y_hat_log)) {
    throw Error(ErrorCode::NonFiniteInput, "point prediction is not finite");
  }
  const double q = cal.quantile(alpha);
  PredictionInterval iv;
  iv.alpha = alpha;
  iv.lower_exact = std::exp(y_hat_log - q);
  iv.upper_exact = std::exp(y_hat_log + q);
  iv.lower = std::max(1.0, std::floor(iv.lower_exact * (1.0 + 1e-12)));
  if (std::isfinite(iv.upper_exact)) iv.upper = std::ceil(iv.upper_exact * (1.0 - 1e-12));
  return iv;
}

}  // namespace qsat
