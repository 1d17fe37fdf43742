#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "qsat/conformal.hpp"
#include "qsat/ensemble.hpp"
#include "qsat/learners/regressor.hpp"
#include "qsat/preprocess.hpp"

namespace qsat {

inline constexpr int kBundleFormatVersion = 1;

/// Everything the service needs: the fitted pipeline, the nine comparison
/// models (plus optional lasso), the stacked model, conformal scores, the
/// comparison report and training metadata.
struct ModelBundle {
  PreprocessPipeline pipeline;
  std::map<ModelKind, RegressorPtr> models;
  std::optional<StackedModel> stacked;
  ConformalCalibration conformal;
  nlohmann::json report = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  /// {"impurity": {feature: w}, "permutation": {feature: w}}, each summing to 1.
  nlohmann::json importance = nlohmann::json::object();
  std::string model_version;
};

nlohmann::json bundle_to_json(const ModelBundle& bundle);
/// Throws VersionMismatch, MissingModel or Schema (field = JSON pointer).
ModelBundle bundle_from_json(const nlohmann::json& j);

/// Hash of the serialized bundle without its report and version fields, so
/// it is stable across retrains that differ only in the report timestamp.
std::string compute_model_version(const ModelBundle& bundle);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace qsat
