#include "qsat/evaluation.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "qsat/error.hpp"
#include "qsat/learners/ensembles.hpp"
#include "qsat/learners/factory.hpp"
#include "qsat/learners/tree.hpp"
#include "qsat/parallel.hpp"
#include "qsat/random.hpp"

namespace qsat {

namespace {

constexpr std::uint64_t kFoldSalt = 0xf01d;
constexpr std::uint64_t kGridFitSalt = 0x9e1d;
constexpr std::uint64_t kRefitSalt = 0x5ef1;
constexpr std::uint64_t kPermuteSalt = 0x9e57;

}  // namespace

// ---------------------------------------------------------------------------
// Folds and metrics

FoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be >= 2", "k");
  if (k > n) {
    throw Error(ErrorCode::InvalidArgument,
                "k (" + std::to_string(k) + ") exceeds the record count (" + std::to_string(n) +
                    ")",
                "k");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, {kFoldSalt});
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(n, 0);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) plan.assignment[order[pos++]] = f;
  }
  return plan;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (auto f : assignment) ++sizes[f];
  return sizes;
}

MetricSet compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                          MetricUnit unit) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::InvalidArgument, "y_true and y_pred differ in length");
  }
  if (y_true.empty()) throw Error(ErrorCode::InvalidArgument, "metrics need at least one value");
  const double n = static_cast<double>(y_true.size());
  const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / n;
  double sse = 0.0, sst = 0.0, sae = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double e = y_pred[i] - y_true[i];
    sse += e * e;
    sae += std::abs(e);
    sst += (y_true[i] - mean) * (y_true[i] - mean);
  }
  MetricSet m;
  m.unit = unit;
  m.mae = sae / n;
  m.rmse = std::sqrt(sse / n);
  const auto [lo, hi] = std::minmax_element(y_true.begin(), y_true.end());
  if (*lo == *hi) {
    double worst = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      worst = std::max(worst, std::abs(y_pred[i] - y_true[i]));
    }
    m.r2 = worst <= kPerfectFitTolerance * std::max(1.0, std::abs(*lo)) ? 1.0 : 0.0;
  } else {
    m.r2 = 1.0 - sse / sst;
  }
  return m;
}

std::string to_string(MetricUnit unit) {
  return unit == MetricUnit::LogSpace ? "log_space" : "raw_space";
}

// ---------------------------------------------------------------------------
// Grid search

std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid) {
  if (!grid.is_object()) {
    throw Error(ErrorCode::InvalidArgument, "a grid must be an object of value lists", "grid");
  }
  std::vector<nlohmann::json> cells = {nlohmann::json::object()};
  // nlohmann objects iterate keys in sorted order.
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw Error(ErrorCode::InvalidArgument, "grid entry must be a non-empty list", key);
    }
    std::vector<nlohmann::json> next;
    next.reserve(cells.size() * values.size());
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        auto c = cell;
        c[key] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

GridSearchResult grid_search(const CellFitter& fitter, const nlohmann::json& grid,
                             const Matrix& x, std::span<const double> y, const FoldPlan& plan,
                             std::uint64_t seed) {
  if (plan.assignment.size() != x.rows()) {
    throw Error(ErrorCode::InvalidArgument, "fold plan does not match the training rows");
  }
  const auto cells = expand_grid(grid);
  const std::size_t k = plan.k;
  struct FoldScore {
    double mae = 0.0, rmse = 0.0;
    std::optional<std::string> failure;
  };
  std::vector<FoldScore> scores(cells.size() * k);

  std::vector<Matrix> fold_x_train(k), fold_x_test(k);
  std::vector<std::vector<double>> fold_y_train(k), fold_y_test(k);
  for (std::size_t f = 0; f < k; ++f) {
    const auto tr = plan.train_indices(f), te = plan.test_indices(f);
    fold_x_train[f] = x.select_rows(tr);
    fold_x_test[f] = x.select_rows(te);
    fold_y_train[f] = select(y, tr);
    fold_y_test[f] = select(y, te);
  }

  parallel_for(scores.size(), [&](std::size_t job) {
    const std::size_t c = job / k, f = job % k;
    auto& out = scores[job];
    try {
      const auto model =
          fitter(cells[c], fold_x_train[f], fold_y_train[f], derive_seed(seed, {kGridFitSalt, f}));
      const auto pred = model->predict(fold_x_test[f]);
      const auto m = compute_metrics(fold_y_test[f], pred);
      out.mae = m.mae;
      out.rmse = m.rmse;
      if (!std::isfinite(out.mae) || !std::isfinite(out.rmse)) {
        out.failure = "non-finite validation error";
      }
    } catch (const std::exception& e) {
      out.failure = e.what();
    }
  });

  GridSearchResult result;
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    GridCell cell;
    cell.params = cells[c];
    for (std::size_t f = 0; f < k; ++f) {
      const auto& s = scores[c * k + f];
      if (s.failure) {
        cell.failure = "fold " + std::to_string(f) + ": " + *s.failure;
        break;
      }
      cell.mae += s.mae;
      cell.rmse += s.rmse;
    }
    cell.mae /= static_cast<double>(k);
    cell.rmse /= static_cast<double>(k);
    if (!cell.failure) {
      if (!best || cell.mae < result.cells[*best].mae ||
          (cell.mae == result.cells[*best].mae && cell.rmse < result.cells[*best].rmse)) {
        best = c;
      }
    }
    result.cells.push_back(std::move(cell));
  }
  if (!best) {
    std::string msg = "every grid cell failed";
    if (!result.cells.empty() && result.cells.front().failure) {
      msg += " (first: " + *result.cells.front().failure + ")";
    }
    throw Error(ErrorCode::FitFailure, msg);
  }
  result.best_index = *best;
  result.best_params = result.cells[*best].params;
  return result;
}

GridSearchResult grid_search(ModelKind kind, const nlohmann::json& grid, const Matrix& x,
                             std::span<const double> y, const FoldPlan& plan, std::uint64_t seed) {
  return grid_search(
      [kind](const nlohmann::json& params, const Matrix& xs, std::span<const double> ys,
             std::uint64_t s) { return fit_regressor(kind, xs, ys, params, s); },
      grid, x, y, plan, seed);
}

// ---------------------------------------------------------------------------
// Importance

std::vector<double> normalize_importance(std::vector<double> values) {
  double total = 0.0;
  for (auto& v : values) {
    if (!(v > 0.0)) v = 0.0;
    total += v;
  }
  if (total > 0.0) {
    for (auto& v : values) v /= total;
  }
  return values;
}

std::vector<double> impurity_importance(const Regressor& model) {
  std::vector<double> imp(model.feature_count(), 0.0);
  auto add = [&](const std::vector<RegressionTree>& trees) {
    for (const auto& t : trees) t.accumulate_importance(imp);
  };
  if (const auto* dt = dynamic_cast<const DecisionTreeModel*>(&model)) {
    dt->tree().accumulate_importance(imp);
  } else if (const auto* rf = dynamic_cast<const RandomForestModel*>(&model)) {
    add(rf->trees());
  } else if (const auto* gb = dynamic_cast<const GradientBoostingModel*>(&model)) {
    add(gb->ensemble().trees());
  } else if (const auto* rb = dynamic_cast<const RegularizedBoostingModel*>(&model)) {
    add(rb->ensemble().trees());
  } else {
    throw Error(ErrorCode::InvalidArgument,
                "impurity importance needs a tree model, got " +
                    std::string(kind_name(model.kind())),
                "kind");
  }
  return normalize_importance(std::move(imp));
}

std::vector<double> permutation_importance(const BatchPredictor& predict, const Matrix& x,
                                           std::span<const double> y, int repeats,
                                           std::uint64_t seed) {
  if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1", "repeats");
  const double baseline = compute_metrics(y, predict(x)).mae;
  const std::size_t d = x.cols(), n = x.rows();
  std::vector<double> out(d, 0.0);
  parallel_for(d, [&](std::size_t j) {
    double total = 0.0;
    for (int r = 0; r < repeats; ++r) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      auto rng = make_rng(seed, {kPermuteSalt, j, static_cast<std::uint64_t>(r)});
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix shuffled = x;
      for (std::size_t i = 0; i < n; ++i) shuffled(i, j) = x(perm[i], j);
      total += compute_metrics(y, predict(shuffled)).mae - baseline;
    }
    out[j] = total / static_cast<double>(repeats);
  });
  return out;
}

std::vector<double> permutation_importance(const Regressor& model, const Matrix& x,
                                           std::span<const double> y, int repeats,
                                           std::uint64_t seed) {
  return permutation_importance([&](const Matrix& m) { return model.predict(m); }, x, y, repeats,
                                seed);
}

// ---------------------------------------------------------------------------
// Report

const ReportRow* ComparisonReport::find(std::string_view kind) const {
  for (const auto& r : rows) {
    if (r.kind == kind) return &r;
  }
  return nullptr;
}

nlohmann::json ComparisonReport::to_json() const {
  auto rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"kind", r.kind}, {"best_params", r.best_params}};
    if (r.failure) {
      j["failure"] = *r.failure;
    } else {
      j["test_r2"] = r.test_r2;
      j["train_r2"] = r.train_r2;
      j["test_mae_log"] = r.test_mae_log;
      j["test_mae_raw"] = r.test_mae_raw;
      j["test_rmse_log"] = r.test_rmse_log;
      j["cv_mae_log"] = r.cv_mae_log;
      j["test_true_raw"] = r.test_true_raw;
      j["test_pred_raw"] = r.test_pred_raw;
    }
    rows_json.push_back(std::move(j));
  }
  return {{"fingerprint", fingerprint},
          {"rows", rows_json},
          {"seed", seed},
          {"timestamp", timestamp},
          {"warnings", warnings}};
}

ComparisonReport ComparisonReport::from_json(const nlohmann::json& j) {
  ComparisonReport rep;
  rep.fingerprint = j.at("fingerprint").get<std::string>();
  rep.seed = j.at("seed").get<std::uint64_t>();
  rep.timestamp = j.at("timestamp").get<std::string>();
  rep.warnings = j.value("warnings", std::vector<std::string>{});
  for (const auto& rj : j.at("rows")) {
    ReportRow r;
    r.kind = rj.at("kind").get<std::string>();
    r.best_params = rj.at("best_params");
    if (rj.contains("failure")) {
      r.failure = rj.at("failure").get<std::string>();
    } else {
      r.test_r2 = rj.at("test_r2").get<double>();
      r.train_r2 = rj.at("train_r2").get<double>();
      r.test_mae_log = rj.at("test_mae_log").get<double>();
      r.test_mae_raw = rj.at("test_mae_raw").get<double>();
      r.test_rmse_log = rj.at("test_rmse_log").get<double>();
      r.cv_mae_log = rj.at("cv_mae_log").get<double>();
      r.test_true_raw = rj.at("test_true_raw").get<std::vector<double>>();
      r.test_pred_raw = rj.at("test_pred_raw").get<std::vector<double>>();
    }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

namespace {

std::string csv_number(double v) { return nlohmann::json(v).dump(); }

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string ComparisonReport::to_csv() const {
  std::string out =
      "kind,test_r2,train_r2,test_mae_log,test_mae_raw,test_rmse_log,cv_mae_log,best_params,"
      "failure\n";
  for (const auto& r : rows) {
    out += r.kind;
    if (r.failure) {
      out += ",,,,,,," + csv_quote(r.best_params.dump()) + "," + csv_quote(*r.failure) + "\n";
      continue;
    }
    for (double v : {r.test_r2, r.train_r2, r.test_mae_log, r.test_mae_raw, r.test_rmse_log,
                     r.cv_mae_log}) {
      out += "," + csv_number(v);
    }
    out += "," + csv_quote(r.best_params.dump()) + ",\n";
  }
  return out;
}

std::string ComparisonReport::plot_csv() const {
  std::string out = "model,y_true,y_pred\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.test_true_raw.size(); ++i) {
      out += r.kind + "," + csv_number(r.test_true_raw[i]) + "," + csv_number(r.test_pred_raw[i]) +
             "\n";
    }
  }
  return out;
}

ReportRow score_model(const Regressor& model, const EvaluationSet& train,
                      const EvaluationSet& test) {
  ReportRow row;
  row.kind = std::string(kind_name(model.kind()));
  row.best_params = model.hyperparams();
  if (train.x != nullptr) {
    row.train_r2 = compute_metrics(train.y_log, model.predict(*train.x)).r2;
  }
  const auto pred = model.predict(*test.x);
  const auto log_m = compute_metrics(test.y_log, pred);
  row.test_r2 = log_m.r2;
  row.test_mae_log = log_m.mae;
  row.test_rmse_log = log_m.rmse;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    row.test_true_raw.push_back(std::exp(test.y_log[i]));
    row.test_pred_raw.push_back(std::exp(pred[i]));
  }
  row.test_mae_raw =
      compute_metrics(row.test_true_raw, row.test_pred_raw, MetricUnit::RawSpace).mae;
  return row;
}

ComparisonOutcome build_comparison_report(const EvaluationSet& train, const EvaluationSet& test,
                                          std::span<const ModelKind> kinds,
                                          const nlohmann::json& grids, std::size_t folds,
                                          std::uint64_t seed) {
  const auto plan = kfold_split(train.x->rows(), folds, seed);
  ComparisonOutcome out;
  out.report.seed = seed;
  for (std::size_t idx = 0; idx < kinds.size(); ++idx) {
    const auto kind = kinds[idx];
    const std::string name(kind_name(kind));
    ReportRow row;
    row.kind = name;
    try {
      const auto& grid = grids.contains(name) ? grids.at(name) : default_grid(kind);
      const auto search = grid_search(kind, grid, *train.x, train.y_log, plan, seed);
      auto model = fit_regressor(kind, *train.x, train.y_log, search.best_params,
                                 derive_seed(seed, {kRefitSalt, static_cast<std::uint64_t>(kind)}));
      row = score_model(*model, train, test);
      row.best_params = search.best_params;
      row.cv_mae_log = search.cells[search.best_index].mae;
      out.models[kind] = std::move(model);
      out.best_params[kind] = search.best_params;
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
    out.report.rows.push_back(std::move(row));
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace qsat
