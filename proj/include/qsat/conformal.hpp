#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsat/learners/regressor.hpp"

namespace qsat {

/// Sorted absolute log-space residuals from a calibration set that the
/// model never trained on.
class ConformalCalibration {
 public:
  ConformalCalibration() = default;
  /// Sorts `scores`; throws on an empty or non-finite score vector.
  explicit ConformalCalibration(std::vector<double> scores, std::string protocol = "test_split");

  const std::vector<double>& scores() const noexcept { return scores_; }
  std::size_t size() const noexcept { return scores_.size(); }
  const std::string& protocol() const noexcept { return protocol_; }

  /// 1-based rank ceil((n + 1)(1 - alpha)).
  std::size_t rank(double alpha) const;
  /// Score at `rank(alpha)`, or +infinity when the rank exceeds n.
  double quantile(double alpha) const;

  nlohmann::json to_json() const;
  static ConformalCalibration from_json(const nlohmann::json& j);

 private:
  std::vector<double> scores_;
  std::string protocol_ = "test_split";
};

ConformalCalibration calibrate(std::span<const double> y_log, std::span<const double> y_hat_log,
                               std::string protocol = "test_split");
ConformalCalibration calibrate(const Regressor& model, const Matrix& x,
                               std::span<const double> y_log,
                               std::string protocol = "test_split");

struct PredictionInterval {
  double lower = 1.0;           // participants, floored and at least 1
  std::optional<double> upper;  // participants, ceiled; nullopt = unbounded
  double alpha = 0.1;
  double lower_exact = 0.0;     // exp(y_hat - q) before rounding
  double upper_exact = 0.0;     // exp(y_hat + q) before rounding (may be inf)

  bool contains(double value) const;
  nlohmann::json to_json() const;
};

/// [exp(y_hat - q), exp(y_hat + q)] with the lower end floored (minimum 1)
/// and the upper end ceiled. Throws Validation unless 0 < alpha < 1.
PredictionInterval predict_interval(const ConformalCalibration& cal, double y_hat_log,
                                    double alpha);

}  // namespace qsat
