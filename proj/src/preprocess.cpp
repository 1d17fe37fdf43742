#include "qsat/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "qsat/error.hpp"
#include "qsat/stats.hpp"

namespace qsat {

void TrimConfig::validate() const {
  if (!(std_multiplier > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "std multiplier must be > 0", "std_multiplier");
  }
}

std::string to_string(TrimMethod method) {
  return method == TrimMethod::Percentile95 ? "percentile_95" : "std_rule";
}

TrimMethod parse_trim_method(const std::string& name) {
  if (name == "percentile_95") return TrimMethod::Percentile95;
  if (name == "std_rule") return TrimMethod::StdRule;
  throw Error(ErrorCode::InvalidArgument, "unknown trim method '" + name + "'", "trim");
}

Dataset trim_outliers(const Dataset& dataset, const TrimConfig& config) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyGroup, "cannot trim an empty dataset");

  std::vector<std::vector<std::size_t>> groups;
  if (config.group_by_design) {
    groups.resize(kDesignCount);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      groups[design_index(dataset.records[i].design)].push_back(i);
    }
  } else {
    groups.emplace_back(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) groups[0][i] = i;
  }

  std::vector<bool> keep(dataset.size(), true);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw Error(ErrorCode::EmptyGroup, "trimming group needs at least 2 records",
                  config.group_by_design ? std::string(design_label(kAllDesigns[g])) : "all");
    }
    std::vector<double> y;
    y.reserve(members.size());
    for (auto i : members) y.push_back(static_cast<double>(dataset.records[i].sample_size));

    if (config.method == TrimMethod::Percentile95) {
      const double cut = stats::percentile(y, 0.95);
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (y[k] > cut) keep[members[k]] = false;
      }
    } else {
      const double m = stats::mean(y);
      const double band = config.std_multiplier * stats::sample_std(y);
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (std::abs(y[k] - m) > band) keep[members[k]] = false;
      }
    }
  }

  Dataset out;
  out.provenance = Provenance::Derived;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (keep[i]) out.records.push_back(dataset.records[i]);
  }
  return out;
}

double log_target(std::int64_t sample_size) {
  if (sample_size < 1) {
    throw Error(ErrorCode::InvalidSampleSize, "log target needs y >= 1", "sample_size");
  }
  return std::log(static_cast<double>(sample_size));
}

double inverse_log_target(double z) { return std::exp(z); }

std::array<double, kDesignCount> encode_design(DesignType design) {
  std::array<double, kDesignCount> out{};
  out[design_index(design)] = 1.0;
  return out;
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (auto d : kAllDesigns) n.push_back("design=" + std::string(design_label(d)));
    for (auto m : kMetricNames) n.emplace_back(m);
    return n;
  }();
  return names;
}

ScalerParams fit_scaler(const Matrix& x) {
  if (x.rows() < 2) throw Error(ErrorCode::InvalidArgument, "scaler fit needs n >= 2");
  ScalerParams p;
  p.mean.resize(x.cols());
  p.std.resize(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const auto column = x.column(c);
    p.mean[c] = stats::mean(column);
    p.std[c] = std::sqrt(stats::population_variance(column));
  }
  return p;
}

Matrix apply_scaler(const Matrix& x, const ScalerParams& params) {
  if (x.cols() != params.mean.size()) {
    throw Error(ErrorCode::WidthMismatch, "scaler width does not match input");
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      out(r, c) = params.std[c] < kScalerEpsilon ? 0.0 : (x(r, c) - params.mean[c]) / params.std[c];
    }
  }
  return out;
}

std::array<double, kFeatureCount> raw_features(DesignType design,
                                               const std::array<int, kMetricCount>& scores) {
  std::array<double, kFeatureCount> f{};
  const auto onehot = encode_design(design);
  std::copy(onehot.begin(), onehot.end(), f.begin());
  for (std::size_t j = 0; j < kMetricCount; ++j) f[kDesignCount + j] = scores[j];
  return f;
}

namespace {

Matrix raw_matrix(const Dataset& records) {
  Matrix x(records.size(), kFeatureCount);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto f = raw_features(records.records[i].design, records.records[i].scores);
    std::copy(f.begin(), f.end(), x.row(i).begin());
  }
  return x;
}

}  // namespace

PipelineFit fit_pipeline(const Dataset& train, const TrimConfig& trim) {
  if (train.empty()) throw Error(ErrorCode::InvalidArgument, "cannot fit on an empty dataset");
  PipelineFit fit;
  fit.trimmed = trim_outliers(train, trim);
  fit.pipeline.trim_ = trim;
  fit.pipeline.scaler_ = fit_scaler(raw_matrix(fit.trimmed));
  fit.pipeline.fitted_ = true;
  return fit;
}

TransformedData PreprocessPipeline::transform(const Dataset& records, bool with_target) const {
  if (!fitted_) throw Error(ErrorCode::NotFitted, "pipeline used before fit");
  TransformedData out{apply_scaler(raw_matrix(records), scaler_), std::nullopt};
  if (with_target) {
    std::vector<double> y;
    y.reserve(records.size());
    for (const auto& r : records.records) y.push_back(log_target(r.sample_size));
    out.y_log = std::move(y);
  }
  return out;
}

std::vector<double> PreprocessPipeline::transform_row(
    DesignType design, const std::array<int, kMetricCount>& scores) const {
  if (!fitted_) throw Error(ErrorCode::NotFitted, "pipeline used before fit");
  const auto raw = raw_features(design, scores);
  Matrix x(1, kFeatureCount, std::vector<double>(raw.begin(), raw.end()));
  return apply_scaler(x, scaler_).data();
}

nlohmann::json PreprocessPipeline::to_json() const {
  nlohmann::json j;
  j["trim"] = {{"method", to_string(trim_.method)},
               {"group_by_design", trim_.group_by_design},
               {"std_multiplier", trim_.std_multiplier}};
  j["target_transform"] = "log_natural";
  std::vector<std::string> labels;
  for (auto d : kAllDesigns) labels.emplace_back(design_label(d));
  j["design_encoding"] = {{"kind", "one_hot"}, {"labels", labels}};
  j["feature_names"] = feature_names();
  j["scaler"] = {{"mean", scaler_.mean}, {"std", scaler_.std}};
  j["fitted"] = fitted_;
  return j;
}

PreprocessPipeline PreprocessPipeline::from_json(const nlohmann::json& j) {
  PreprocessPipeline p;
  try {
    const auto& t = j.at("trim");
    p.trim_.method = parse_trim_method(t.at("method").get<std::string>());
    p.trim_.group_by_design = t.at("group_by_design").get<bool>();
    p.trim_.std_multiplier = t.at("std_multiplier").get<double>();
    if (j.at("target_transform").get<std::string>() != "log_natural") {
      throw Error(ErrorCode::Schema, "unsupported target transform", "/pipeline/target_transform");
    }
    if (j.at("feature_names").get<std::vector<std::string>>() != feature_names()) {
      throw Error(ErrorCode::Schema, "feature layout differs from this build",
                  "/pipeline/feature_names");
    }
    p.scaler_.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    p.scaler_.std = j.at("scaler").at("std").get<std::vector<double>>();
    p.fitted_ = j.at("fitted").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, e.what(), "/pipeline");
  }
  if (p.scaler_.mean.size() != kFeatureCount || p.scaler_.std.size() != kFeatureCount) {
    throw Error(ErrorCode::Schema, "scaler must have 15 columns", "/pipeline/scaler");
  }
  return p;
}

}  // namespace qsat
