#include "qsat/training.hpp"

#include <cmath>

#include "qsat/conformal.hpp"
#include "qsat/error.hpp"
#include "qsat/learners/factory.hpp"
#include "qsat/random.hpp"

namespace qsat {

namespace {

constexpr std::uint64_t kCalibrationSplitSalt = 0xca1;
constexpr std::uint64_t kPermutationSalt = 0x9e5;

std::vector<ModelKind> searched_kinds(const TrainOptions& options) {
  std::vector<ModelKind> kinds(kCoreKinds.begin(), kCoreKinds.end());
  if (options.include_lasso) kinds.push_back(ModelKind::Lasso);
  return kinds;
}

nlohmann::json named_importance(const std::vector<double>& values) {
  auto out = nlohmann::json::object();
  const auto& names = feature_names();
  for (std::size_t j = 0; j < values.size(); ++j) out[names[j]] = values[j];
  return out;
}

}  // namespace

std::string to_string(CalibrationProtocol protocol) {
  return protocol == CalibrationProtocol::TestSplit ? "test_split" : "holdout";
}

nlohmann::json TrainOptions::to_json() const {
  return {{"balance", balance},
          {"calibration", to_string(calibration)},
          {"calibration_fraction", calibration_fraction},
          {"folds", folds},
          {"include_lasso", include_lasso},
          {"meta", to_string(meta)},
          {"permutation_repeats", permutation_repeats},
          {"seed", seed},
          {"test_fraction", test_fraction},
          {"trim",
           {{"group_by_design", trim.group_by_design},
            {"method", to_string(trim.method)},
            {"std_multiplier", trim.std_multiplier}}}};
}

nlohmann::json resolved_grids(const TrainOptions& options) {
  auto out = nlohmann::json::object();
  for (auto kind : searched_kinds(options)) {
    const std::string name(kind_name(kind));
    out[name] = options.grids.contains(name) ? options.grids.at(name) : default_grid(kind);
  }
  return out;
}

TrainOutcome train_bundle(const Dataset& data, std::string_view csv_bytes,
                          const TrainOptions& options) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "training data is empty");
  for (const auto& [name, grid] : options.grids.items()) {
    parse_kind(name);
    expand_grid(grid);
  }
  options.trim.validate();

  TrainOutcome out;
  auto& summary = out.summary;
  summary.input_records = data.size();
  const Dataset balanced = options.balance ? balance_by_design(data, options.seed) : data;
  summary.balanced_records = balanced.size();

  auto [train, test] = train_test_split(balanced, options.test_fraction, options.seed);
  Dataset calibration_set = test;
  if (options.calibration == CalibrationProtocol::Holdout) {
    auto [rest, cal] = train_test_split(test, options.calibration_fraction,
                                        derive_seed(options.seed, {kCalibrationSplitSalt}));
    test = std::move(rest);
    calibration_set = std::move(cal);
  }
  summary.train_records = train.size();
  summary.test_records = test.size();
  summary.calibration_records = calibration_set.size();

  auto fit = fit_pipeline(train, options.trim);
  summary.trimmed_records = fit.trimmed.size();
  const auto train_t = fit.pipeline.transform(fit.trimmed);
  const auto test_t = fit.pipeline.transform(test);
  const EvaluationSet train_set{&train_t.x, *train_t.y_log};
  const EvaluationSet test_set{&test_t.x, *test_t.y_log};

  const auto kinds = searched_kinds(options);
  const auto grids = resolved_grids(options);
  auto comparison =
      build_comparison_report(train_set, test_set, kinds, grids, options.folds, options.seed);

  auto& report = comparison.report;
  report.fingerprint = sha256_hex(csv_bytes);
  report.seed = options.seed;
  report.timestamp = utc_timestamp();

  bool any_core = false;
  for (auto kind : kCoreKinds) {
    if (comparison.models.contains(kind)) {
      any_core = true;
    } else {
      out.failed_kinds.emplace_back(kind_name(kind));
    }
  }
  if (!any_core) {
    std::string msg = "every model kind failed to train";
    if (!report.rows.empty() && report.rows.front().failure) {
      msg += " (" + report.rows.front().kind + ": " + *report.rows.front().failure + ")";
    }
    throw Error(ErrorCode::FitFailure, msg);
  }

  ModelBundle& bundle = out.bundle;
  bundle.pipeline = fit.pipeline;
  bundle.models = comparison.models;

  if (out.failed_kinds.empty()) {
    StackingConfig stacking;
    stacking.meta = options.meta;
    stacking.folds = options.folds;
    stacking.seed = options.seed;
    stacking.base_params = comparison.best_params;
    bundle.stacked = fit_stacked(train_t.x, *train_t.y_log, stacking).model;

    const auto cal_t = options.calibration == CalibrationProtocol::Holdout
                           ? fit.pipeline.transform(calibration_set)
                           : test_t;
    bundle.conformal = calibrate(*cal_t.y_log, ensemble_log_prediction(bundle.models, cal_t.x),
                                 to_string(options.calibration));

    const auto impurity = impurity_importance(*bundle.models.at(ModelKind::RandomForest));
    const auto permutation = normalize_importance(permutation_importance(
        [&](const Matrix& m) { return ensemble_log_prediction(bundle.models, m); }, test_t.x,
        *test_t.y_log, options.permutation_repeats,
        derive_seed(options.seed, {kPermutationSalt})));
    bundle.importance = {{"impurity", named_importance(impurity)},
                         {"permutation", named_importance(permutation)}};
  }

  bundle.metadata = {{"config", options.to_json()},
                     {"counts",
                      {{"balanced", summary.balanced_records},
                       {"calibration", summary.calibration_records},
                       {"input", summary.input_records},
                       {"test", summary.test_records},
                       {"train", summary.train_records},
                       {"train_after_trim", summary.trimmed_records}}},
                     {"fingerprint", report.fingerprint},
                     {"grids", grids},
                     {"seed", options.seed}};
  bundle.report = report.to_json();
  out.report = std::move(report);
  if (out.failed_kinds.empty()) bundle.model_version = compute_model_version(bundle);
  return out;
}

}  // namespace qsat
