#pragma once

#include <cstdint>

#include <json.hpp>

#include "qsat/learners/regressor.hpp"

namespace qsat {

/// Fits `kind` with hyperparameters `params` (missing keys take defaults,
/// unknown keys are rejected).
RegressorPtr fit_regressor(ModelKind kind, const Matrix& x, std::span<const double> y,
                           const nlohmann::json& params, std::uint64_t seed);

/// {"kind", "hyperparams", "state"}; inverted by regressor_from_json.
nlohmann::json regressor_to_json(const Regressor& model);
RegressorPtr regressor_from_json(const nlohmann::json& j);

/// The reference best-parameter point for each kind.
nlohmann::json default_params(ModelKind kind);

/// Default search grid: key -> list of candidate values. Every grid contains
/// the `default_params` point.
nlohmann::json default_grid(ModelKind kind);

/// {"knn": {...}, ...} for the nine core kinds plus lasso.
nlohmann::json default_grids();

}  // namespace qsat
