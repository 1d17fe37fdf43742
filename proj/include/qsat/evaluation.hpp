#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsat/learners/regressor.hpp"

namespace qsat {

// ---------------------------------------------------------------------------
// Folds and metrics

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;  // record index -> fold

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle, then contiguous chunks; the first n % k folds get one
/// extra record.
FoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

enum class MetricUnit { LogSpace, RawSpace };

struct MetricSet {
  double r2 = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  MetricUnit unit = MetricUnit::LogSpace;
};

/// Largest absolute error (relative to max(1, |y|)) that still counts as a
/// perfect fit of a constant target.
inline constexpr double kPerfectFitTolerance = 1e-12;

/// When y_true is constant, r2 is 1 for a perfect fit (every error within
/// kPerfectFitTolerance) and 0 otherwise.
MetricSet compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                          MetricUnit unit = MetricUnit::LogSpace);

std::string to_string(MetricUnit unit);

// ---------------------------------------------------------------------------
// Grid search

/// Cartesian product of a {key: [values...]} object. Keys are taken in
/// sorted order and the last key varies fastest.
std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid);

struct GridCell {
  nlohmann::json params;
  double mae = 0.0;   // mean over folds, log space
  double rmse = 0.0;
  std::optional<std::string> failure;
};

struct GridSearchResult {
  nlohmann::json best_params;
  std::size_t best_index = 0;
  std::vector<GridCell> cells;
};

using CellFitter = std::function<RegressorPtr(const nlohmann::json& params, const Matrix& x,
                                              std::span<const double> y, std::uint64_t seed)>;

/// Lowest mean CV MAE wins, then lowest RMSE, then earliest grid order.
/// A failing cell is recorded and skipped; if every cell fails the search
/// throws FitFailure.
GridSearchResult grid_search(const CellFitter& fitter, const nlohmann::json& grid,
                             const Matrix& x, std::span<const double> y, const FoldPlan& plan,
                             std::uint64_t seed);
GridSearchResult grid_search(ModelKind kind, const nlohmann::json& grid, const Matrix& x,
                             std::span<const double> y, const FoldPlan& plan, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Feature importance

/// Summed split gains per feature, normalized to 1 (all zeros without
/// splits). Throws InvalidArgument for non-tree kinds.
std::vector<double> impurity_importance(const Regressor& model);

using BatchPredictor = std::function<std::vector<double>(const Matrix&)>;

/// Mean over repeats of MAE(column j permuted) - MAE(baseline).
std::vector<double> permutation_importance(const BatchPredictor& predict, const Matrix& x,
                                           std::span<const double> y, int repeats,
                                           std::uint64_t seed);
std::vector<double> permutation_importance(const Regressor& model, const Matrix& x,
                                           std::span<const double> y, int repeats,
                                           std::uint64_t seed);

/// Clamps negatives to 0 and rescales to sum 1 (all zeros stay zero).
std::vector<double> normalize_importance(std::vector<double> values);

// ---------------------------------------------------------------------------
// Comparison report

struct ReportRow {
  std::string kind;
  std::optional<std::string> failure;
  double test_r2 = 0.0;
  double train_r2 = 0.0;
  double test_mae_log = 0.0;
  double test_mae_raw = 0.0;
  double test_rmse_log = 0.0;
  double cv_mae_log = 0.0;
  nlohmann::json best_params = nlohmann::json::object();
  std::vector<double> test_true_raw;
  std::vector<double> test_pred_raw;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
  std::string fingerprint;  // SHA-256 of the training CSV bytes
  std::uint64_t seed = 0;
  std::string timestamp;    // ISO-8601 UTC
  std::vector<std::string> warnings;

  const ReportRow* find(std::string_view kind) const;

  nlohmann::json to_json() const;
  static ComparisonReport from_json(const nlohmann::json& j);
  /// One row per model: kind, test_r2, train_r2, test_mae_log, test_mae_raw,
  /// test_rmse_log, cv_mae_log, best_params.
  std::string to_csv() const;
  /// Predicted-vs-true scatter data: model, y_true, y_pred (participants).
  std::string plot_csv() const;
};

struct EvaluationSet {
  const Matrix* x = nullptr;
  std::span<const double> y_log;
};

struct ComparisonOutcome {
  ComparisonReport report;
  std::map<ModelKind, RegressorPtr> models;      // refit winners
  std::map<ModelKind, nlohmann::json> best_params;
};

/// For every kind: grid search on train, refit the winner on all of train,
/// score train and test. Failures are recorded in the row.
ComparisonOutcome build_comparison_report(const EvaluationSet& train, const EvaluationSet& test,
                                          std::span<const ModelKind> kinds,
                                          const nlohmann::json& grids, std::size_t folds,
                                          std::uint64_t seed);

/// Fills a report row by scoring an already fitted model.
ReportRow score_model(const Regressor& model, const EvaluationSet& train,
                      const EvaluationSet& test);

std::string sha256_hex(std::string_view bytes);
std::string utc_timestamp();

}  // namespace qsat
