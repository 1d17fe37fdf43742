#include "qsat/bundle.hpp"

#include <fstream>
#include <sstream>

#include "qsat/error.hpp"
#include "qsat/evaluation.hpp"
#include "qsat/learners/factory.hpp"

namespace qsat {

namespace {

nlohmann::json body_without_version(const ModelBundle& b) {
  auto models = nlohmann::json::object();
  for (const auto& [kind, model] : b.models) {
    models[std::string(kind_name(kind))] = regressor_to_json(*model);
  }
  return {{"conformal", b.conformal.to_json()},
          {"format_version", kBundleFormatVersion},
          {"importance", b.importance},
          {"metadata", b.metadata},
          {"models", models},
          {"pipeline", b.pipeline.to_json()},
          {"stacked", b.stacked ? b.stacked->to_json() : nlohmann::json(nullptr)}};
}

template <typename Fn>
auto section(const std::string& pointer, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Schema || e.code() == ErrorCode::MissingModel ||
        e.code() == ErrorCode::VersionMismatch) {
      if (e.field().empty()) throw Error(e.code(), e.what(), pointer);
      throw;
    }
    throw Error(ErrorCode::Schema, e.what(), pointer);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, e.what(), pointer);
  }
}

}  // namespace

std::string compute_model_version(const ModelBundle& bundle) {
  return sha256_hex(body_without_version(bundle).dump()).substr(0, 16);
}

nlohmann::json bundle_to_json(const ModelBundle& bundle) {
  auto j = body_without_version(bundle);
  j["model_version"] = bundle.model_version.empty() ? compute_model_version(bundle)
                                                    : bundle.model_version;
  j["report"] = bundle.report;
  return j;
}

ModelBundle bundle_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, "bundle must be a JSON object", "");
  const auto version = section("/format_version", [&] { return j.at("format_version").get<int>(); });
  if (version != kBundleFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "bundle format_version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kBundleFormatVersion) + ")",
                "/format_version");
  }
  ModelBundle b;
  b.pipeline = section("/pipeline", [&] { return PreprocessPipeline::from_json(j.at("pipeline")); });
  const auto& models = section("/models", [&]() -> const nlohmann::json& {
    const auto& m = j.at("models");
    if (!m.is_object()) throw Error(ErrorCode::Schema, "models must be an object");
    return m;
  });
  for (auto kind : kCoreKinds) {
    const std::string name(kind_name(kind));
    if (!models.contains(name)) {
      throw Error(ErrorCode::MissingModel, "bundle has no " + name + " model", name);
    }
  }
  for (const auto& [name, entry] : models.items()) {
    const auto kind = section("/models/" + name, [&] {
      const auto k = parse_kind(name);
      if (entry.at("kind").get<std::string>() != name) {
        throw Error(ErrorCode::Schema, "model entry kind does not match its key");
      }
      return k;
    });
    b.models[kind] = section("/models/" + name, [&] { return regressor_from_json(entry); });
    if (b.models[kind]->feature_count() != kFeatureCount) {
      throw Error(ErrorCode::Schema, "model width differs from the pipeline feature count",
                  "/models/" + name);
    }
  }
  if (j.contains("stacked") && !j.at("stacked").is_null()) {
    b.stacked = section("/stacked", [&] { return StackedModel::from_json(j.at("stacked")); });
  }
  b.conformal =
      section("/conformal", [&] { return ConformalCalibration::from_json(j.at("conformal")); });
  b.report = section("/report", [&] { return j.at("report"); });
  b.metadata = section("/metadata", [&] { return j.at("metadata"); });
  b.importance = section("/importance", [&] { return j.at("importance"); });
  b.model_version =
      section("/model_version", [&] { return j.at("model_version").get<std::string>(); });
  return b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for reading", path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string(), path.string());
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  write_file(path, bundle_to_json(bundle).dump() + "\n");
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  const auto text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema, std::string("bundle is not valid JSON (truncated?): ") + e.what(),
                "");
  }
  return bundle_from_json(j);
}

}  // namespace qsat
