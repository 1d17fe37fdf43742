#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsat/bundle.hpp"
#include "qsat/data_model.hpp"
#include "qsat/ensemble.hpp"
#include "qsat/evaluation.hpp"
#include "qsat/preprocess.hpp"

namespace qsat {

enum class CalibrationProtocol { TestSplit, Holdout };

struct TrainOptions {
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  std::size_t folds = 5;
  bool balance = true;
  TrimConfig trim;
  /// kind name -> grid; kinds absent here use default_grid.
  nlohmann::json grids = nlohmann::json::object();
  bool include_lasso = true;
  CalibrationProtocol calibration = CalibrationProtocol::TestSplit;
  /// Share of the test split set aside for calibration under Holdout.
  double calibration_fraction = 0.5;
  MetaKind meta = MetaKind::Linear;
  int permutation_repeats = 5;

  nlohmann::json to_json() const;
};

struct TrainSummary {
  std::size_t input_records = 0;
  std::size_t balanced_records = 0;
  std::size_t train_records = 0;
  std::size_t trimmed_records = 0;  // train rows left after trimming
  std::size_t test_records = 0;
  std::size_t calibration_records = 0;
};

struct TrainOutcome {
  ModelBundle bundle;
  ComparisonReport report;
  TrainSummary summary;
  /// Core kinds whose search or refit failed; the bundle is incomplete
  /// (and unusable) whenever this is non-empty.
  std::vector<std::string> failed_kinds;
};

/// balance -> split -> trim + fit pipeline -> grid search and refit per
/// kind -> stack -> conformal calibration -> importances. `csv_bytes` feeds
/// the dataset fingerprint. Throws FitFailure if every kind fails.
TrainOutcome train_bundle(const Dataset& data, std::string_view csv_bytes,
                          const TrainOptions& options);

/// Resolved grid for every kind the run searches.
nlohmann::json resolved_grids(const TrainOptions& options);

std::string to_string(CalibrationProtocol protocol);

}  // namespace qsat
