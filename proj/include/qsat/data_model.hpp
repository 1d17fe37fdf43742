#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qsat {

// Enumerator order is the alphabetical label order, which is also the
// one-hot column order used by the preprocessing pipeline.
enum class DesignType : std::uint8_t {
  CaseStudy,
  EthnographicResearch,
  GroundedTheory,
  NarrativeResearch,
  Phenomenology,
};

inline constexpr std::size_t kDesignCount = 5;
inline constexpr std::array<DesignType, kDesignCount> kAllDesigns = {
    DesignType::CaseStudy, DesignType::EthnographicResearch, DesignType::GroundedTheory,
    DesignType::NarrativeResearch, DesignType::Phenomenology};

std::string_view design_label(DesignType design);
/// Throws Error{UnknownDesign} for anything but the five CSV labels.
DesignType parse_design(std::string_view label);
std::optional<DesignType> try_parse_design(std::string_view label);
inline std::size_t design_index(DesignType d) { return static_cast<std::size_t>(d); }

// The ten ordinal methodology metrics, in CSV column order.
enum class Metric : std::uint8_t {
  ResearchScope,
  ResearcherCompetence,
  InformationPower,
  InterviewCount,
  InterviewDuration,
  ObservationDuration,
  Homogeneity,
  ParticipantOriginality,
  DataVariety,
  DataQuality,
};

inline constexpr std::size_t kMetricCount = 10;
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "research_scope",     "researcher_competence",  "information_power",
    "interview_count",    "interview_duration",     "observation_duration",
    "homogeneity",        "participant_originality", "data_variety",
    "data_quality"};

inline std::size_t metric_index(Metric m) { return static_cast<std::size_t>(m); }
std::optional<std::size_t> find_metric(std::string_view name);

/// Points a metric may take. The rubric appears in two sub-scales
/// ({15,20,25} and {10,15,20}); the default accepts their union.
struct ScoreScale {
  std::vector<int> allowed = {10, 15, 20, 25};
  bool contains(int score) const;
};

struct StudyRecord {
  DesignType design = DesignType::CaseStudy;
  std::array<int, kMetricCount> scores{};
  std::int64_t sample_size = 1;

  int score(Metric m) const { return scores[metric_index(m)]; }
  bool operator==(const StudyRecord&) const = default;
};

/// Throws on a score outside `scale` or sample_size < 1.
void validate_record(const StudyRecord& record, const ScoreScale& scale = {});

enum class Provenance : std::uint8_t { Ingested, Synthetic, Derived };

struct Dataset {
  std::vector<StudyRecord> records;
  Provenance provenance = Provenance::Derived;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::array<std::size_t, kDesignCount> design_counts() const;
  std::vector<double> targets() const;
};

inline constexpr std::string_view kCsvHeader =
    "design,research_scope,researcher_competence,information_power,interview_count,"
    "interview_duration,observation_duration,homogeneity,participant_originality,"
    "data_variety,data_quality,sample_size";

Dataset parse_csv(std::string_view text, const ScoreScale& scale = {});
std::string serialize_csv(const Dataset& dataset);

/// Downsamples every design to the smallest design count, seeded, keeping
/// the surviving records in their original order.
Dataset balance_by_design(const Dataset& dataset, std::uint64_t seed);

/// Stratified by design; both halves keep the input order.
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed);

struct DesignCalibration {
  double target_mean = 0.0;    // participants
  double target_median = 0.0;  // participants
  double mu = 0.0;             // log-participants
  double sigma = 1.0;
  /// Strength of each metric's link to sample size within this design; the
  /// correlation of a metric's latent with log-size is beta * weight.
  std::array<double, kMetricCount> metric_weights{};
};

struct GeneratorConfig {
  std::array<DesignCalibration, kDesignCount> designs{};
  double beta = 0.8;              // monotone-signal strength
  double flip_probability = 0.1;  // chance a score is redrawn uniformly
  std::size_t per_design = 150;
  std::uint64_t seed = 42;
  std::vector<int> levels = {15, 20, 25};

  void validate() const;
};

/// Lognormal parameters moment-matched to the per-design mean/median
/// sample sizes of the reference corpus (median = e^mu,
/// mean = e^(mu + sigma^2 / 2)).
GeneratorConfig default_generator_config();
DesignCalibration calibrate_lognormal(double mean, double median);

Dataset synthesize_dataset(const GeneratorConfig& config);

struct ColumnStats {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1)
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;  // excess
};

ColumnStats column_stats(std::vector<double> values);

/// One entry per metric column plus "sample_size", in CSV order.
std::vector<std::pair<std::string, ColumnStats>> descriptive_stats(const Dataset& dataset);

}  // namespace qsat
