#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "qsat/bundle.hpp"
#include "qsat/data_model.hpp"

namespace qsat {

struct PredictionRequest {
  DesignType design = DesignType::CaseStudy;
  std::array<int, kMetricCount> scores{};
  double alpha = 0.1;

  /// Strict parse: unknown or missing fields, non-integer scores, scores
  /// outside `scale` and alpha outside (0, 1) raise Error{Validation} whose
  /// field names the offender ("design", "scores.information_power", ...).
  static PredictionRequest from_json(const nlohmann::json& body, const ScoreScale& scale = {});
  nlohmann::json to_json() const;
};

/// Per-model raw predictions (plus "stacked"), the nine-model mean, the
/// ceiling recommendation, the conformal interval around the mean and the
/// impurity importances. Contains no timestamps: identical inputs give
/// identical bytes.
nlohmann::json handle_predict(const ModelBundle& bundle, const PredictionRequest& request);
nlohmann::json handle_models(const ModelBundle& bundle);
nlohmann::json handle_importance(const ModelBundle& bundle);
nlohmann::json handle_health(const ModelBundle& bundle);

/// {"error": {"field": ..., "message": ...}}
nlohmann::json error_body(const std::string& field, const std::string& message);

/// Shared, swappable reference to the active bundle. Readers keep the
/// bundle they fetched alive until they finish, so a reload never pulls a
/// bundle out from under an in-flight request.
class BundleHolder {
 public:
  explicit BundleHolder(std::shared_ptr<const ModelBundle> bundle);

  std::shared_ptr<const ModelBundle> get() const;
  void set(std::shared_ptr<const ModelBundle> bundle);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ModelBundle> bundle_;
};

}  // namespace qsat
