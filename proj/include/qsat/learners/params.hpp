#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "qsat/error.hpp"

namespace qsat {

/// Reads a hyperparameter object key by key and rejects leftovers, so a typo
/// in a grid file fails loudly instead of silently using a default.
class ParamReader {
 public:
  explicit ParamReader(const nlohmann::json& params);

  double number(const std::string& key, double fallback);
  int integer(const std::string& key, int fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  /// JSON null maps to nullopt ("unlimited").
  std::optional<int> optional_integer(const std::string& key, std::optional<int> fallback);
  /// Raw access for composite values; nullptr when absent.
  const nlohmann::json* raw(const std::string& key);

  /// Throws Error{InvalidArgument} naming the first unknown key.
  void finish() const;

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  const nlohmann::json& params_;
  std::set<std::string> seen_;
};

}  // namespace qsat
