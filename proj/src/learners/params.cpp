#include "qsat/learners/params.hpp"

#include <cmath>

namespace qsat {

ParamReader::ParamReader(const nlohmann::json& params) : params_(params) {
  if (!params_.is_null() && !params_.is_object()) {
    throw Error(ErrorCode::InvalidArgument, "hyperparameters must be a JSON object");
  }
}

const nlohmann::json* ParamReader::raw(const std::string& key) {
  seen_.insert(key);
  if (params_.is_null()) return nullptr;
  auto it = params_.find(key);
  return it == params_.end() ? nullptr : &*it;
}

double ParamReader::number(const std::string& key, double fallback) {
  const auto* v = raw(key);
  if (!v) return fallback;
  if (!v->is_number()) fail(key, "expected a number");
  return v->get<double>();
}

int ParamReader::integer(const std::string& key, int fallback) {
  const auto* v = raw(key);
  if (!v) return fallback;
  if (v->is_number_integer()) return v->get<int>();
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (std::floor(d) == d) return static_cast<int>(d);
  }
  fail(key, "expected an integer");
}

bool ParamReader::boolean(const std::string& key, bool fallback) {
  const auto* v = raw(key);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(key, "expected true or false");
  return v->get<bool>();
}

std::string ParamReader::text(const std::string& key, const std::string& fallback) {
  const auto* v = raw(key);
  if (!v) return fallback;
  if (!v->is_string()) fail(key, "expected a string");
  return v->get<std::string>();
}

std::optional<int> ParamReader::optional_integer(const std::string& key,
                                                 std::optional<int> fallback) {
  const auto* v = raw(key);
  if (!v) return fallback;
  if (v->is_null()) return std::nullopt;
  if (!v->is_number_integer()) fail(key, "expected an integer or null");
  return v->get<int>();
}

void ParamReader::finish() const {
  if (params_.is_null()) return;
  for (const auto& [key, _] : params_.items()) {
    if (!seen_.count(key)) fail(key, "unknown hyperparameter");
  }
}

void ParamReader::fail(const std::string& key, const std::string& message) const {
  throw Error(ErrorCode::InvalidArgument, message, key);
}

}  // namespace qsat
