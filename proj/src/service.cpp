#include "qsat/service.hpp"

#include <cmath>

#include "qsat/error.hpp"
#include "qsat/preprocess.hpp"

namespace qsat {

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::Validation, message, field);
}

}  // namespace

PredictionRequest PredictionRequest::from_json(const nlohmann::json& body,
                                               const ScoreScale& scale) {
  if (!body.is_object()) invalid("", "request body must be a JSON object");
  for (const auto& [key, value] : body.items()) {
    if (key != "design" && key != "scores" && key != "alpha") {
      invalid(key, "unknown field '" + key + "'");
    }
  }
  PredictionRequest req;
  if (!body.contains("design")) invalid("design", "missing field 'design'");
  if (!body["design"].is_string()) invalid("design", "design must be a string");
  const auto label = body["design"].get<std::string>();
  const auto design = try_parse_design(label);
  if (!design) {
    invalid("design", "unknown design '" + label +
                          "' (expected case_study, ethnographic, grounded_theory, narrative "
                          "or phenomenology)");
  }
  req.design = *design;

  if (!body.contains("scores")) invalid("scores", "missing field 'scores'");
  const auto& scores = body["scores"];
  if (!scores.is_object()) invalid("scores", "scores must be an object");
  for (const auto& [key, value] : scores.items()) {
    if (!find_metric(key)) invalid("scores." + key, "unknown metric '" + key + "'");
  }
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    const std::string key(kMetricNames[j]);
    const std::string field = "scores." + key;
    if (!scores.contains(key)) invalid(field, "missing score '" + key + "'");
    const auto& v = scores[key];
    if (!v.is_number_integer()) invalid(field, "score must be an integer");
    const auto score = v.get<long long>();
    if (score < INT32_MIN || score > INT32_MAX || !scale.contains(static_cast<int>(score))) {
      invalid(field, "score " + std::to_string(score) + " is not an allowed value");
    }
    req.scores[j] = static_cast<int>(score);
  }

  if (body.contains("alpha") && !body["alpha"].is_null()) {
    if (!body["alpha"].is_number()) invalid("alpha", "alpha must be a number");
    req.alpha = body["alpha"].get<double>();
  }
  if (!(req.alpha > 0.0 && req.alpha < 1.0)) {
    invalid("alpha", "alpha must lie strictly between 0 and 1");
  }
  return req;
}

nlohmann::json PredictionRequest::to_json() const {
  auto scores_json = nlohmann::json::object();
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    scores_json[std::string(kMetricNames[j])] = scores[j];
  }
  return {{"alpha", alpha}, {"design", std::string(design_label(design))}, {"scores", scores_json}};
}

nlohmann::json handle_predict(const ModelBundle& bundle, const PredictionRequest& request) {
  const auto row = bundle.pipeline.transform_row(request.design, request.scores);
  std::map<ModelKind, double> raw;
  auto per_model = nlohmann::json::object();
  for (auto kind : kCoreKinds) {
    const auto it = bundle.models.find(kind);
    if (it == bundle.models.end()) {
      throw Error(ErrorCode::MissingModel, "bundle has no " + std::string(kind_name(kind)) + " model",
                  std::string(kind_name(kind)));
    }
    const double value = inverse_log_target(it->second->predict_one(row));
    raw[kind] = value;
    per_model[std::string(kind_name(kind))] = value;
  }
  if (bundle.stacked) {
    per_model["stacked"] = inverse_log_target(bundle.stacked->predict_one(row));
  }
  const double mean = ensemble_average(raw);
  const auto interval = predict_interval(bundle.conformal, std::log(mean), request.alpha);
  const auto recommended = std::max(1.0, std::ceil(mean * (1.0 - 1e-12)));

  return {{"ensemble_mean", mean},
          {"importances", bundle.importance.value("impurity", nlohmann::json::object())},
          {"interval", interval.to_json()},
          {"model_version", bundle.model_version},
          {"per_model", per_model},
          {"recommended_n", static_cast<std::int64_t>(recommended)}};
}

nlohmann::json handle_models(const ModelBundle& bundle) {
  auto out = bundle.report;
  out["model_version"] = bundle.model_version;
  return out;
}

nlohmann::json handle_importance(const ModelBundle& bundle) {
  return {{"impurity", bundle.importance.value("impurity", nlohmann::json::object())},
          {"permutation", bundle.importance.value("permutation", nlohmann::json::object())}};
}

nlohmann::json handle_health(const ModelBundle& bundle) {
  return {{"model_version", bundle.model_version}, {"status", "ok"}};
}

nlohmann::json error_body(const std::string& field, const std::string& message) {
  return {{"error", {{"field", field}, {"message", message}}}};
}

BundleHolder::BundleHolder(std::shared_ptr<const ModelBundle> bundle) : bundle_(std::move(bundle)) {}

std::shared_ptr<const ModelBundle> BundleHolder::get() const {
  std::lock_guard lock(mutex_);
  return bundle_;
}

void BundleHolder::set(std::shared_ptr<const ModelBundle> bundle) {
  std::lock_guard lock(mutex_);
  bundle_ = std::move(bundle);
}

}  // namespace qsat
