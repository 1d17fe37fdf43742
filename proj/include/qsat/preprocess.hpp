#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsat/data_model.hpp"
#include "qsat/matrix.hpp"

namespace qsat {

enum class TrimMethod { Percentile95, StdRule };

struct TrimConfig {
  TrimMethod method = TrimMethod::Percentile95;
  bool group_by_design = true;
  double std_multiplier = 3.0;  // std_rule only

  void validate() const;
};

/// percentile_95 drops records whose sample size is strictly above the
/// group's 95th percentile; std_rule drops |y - mean| > k * sample std.
Dataset trim_outliers(const Dataset& dataset, const TrimConfig& config);

double log_target(std::int64_t sample_size);
double inverse_log_target(double z);

inline constexpr std::size_t kFeatureCount = kDesignCount + kMetricCount;

/// One-hot in alphabetical label order (case_study first).
std::array<double, kDesignCount> encode_design(DesignType design);

/// Feature column names: "design=<label>" x5 then the ten metric names.
const std::vector<std::string>& feature_names();

struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> std;  // population convention

  bool operator==(const ScalerParams&) const = default;
};

/// Columns whose std is below this are mapped to 0.
inline constexpr double kScalerEpsilon = 1e-12;

ScalerParams fit_scaler(const Matrix& x);
Matrix apply_scaler(const Matrix& x, const ScalerParams& params);

/// Raw (unscaled) 15-column layout for one record.
std::array<double, kFeatureCount> raw_features(DesignType design,
                                               const std::array<int, kMetricCount>& scores);

struct TransformedData {
  Matrix x;
  std::optional<std::vector<double>> y_log;
};

struct PipelineFit;

/// Fitted transform chain. Trimming happens only while fitting; `transform`
/// never trims or refits, so inference rows go through exactly the
/// encode -> scale path the model was trained on.
class PreprocessPipeline {
 public:
  PreprocessPipeline() = default;

  bool fitted() const noexcept { return fitted_; }
  const TrimConfig& trim() const noexcept { return trim_; }
  const ScalerParams& scaler() const noexcept { return scaler_; }

  TransformedData transform(const Dataset& records, bool with_target = true) const;
  std::vector<double> transform_row(DesignType design,
                                    const std::array<int, kMetricCount>& scores) const;

  nlohmann::json to_json() const;
  static PreprocessPipeline from_json(const nlohmann::json& j);

 private:
  friend PipelineFit fit_pipeline(const Dataset& train, const TrimConfig& trim);

  TrimConfig trim_;
  ScalerParams scaler_;
  bool fitted_ = false;
};

struct PipelineFit {
  PreprocessPipeline pipeline;
  Dataset trimmed;  // the training records that survived trimming
};

PipelineFit fit_pipeline(const Dataset& train, const TrimConfig& trim = {});

std::string to_string(TrimMethod method);
TrimMethod parse_trim_method(const std::string& name);

}  // namespace qsat
