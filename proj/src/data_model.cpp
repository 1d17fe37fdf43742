#include "qsat/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "qsat/error.hpp"
#include "qsat/random.hpp"
#include "qsat/stats.hpp"

namespace qsat {

namespace {

constexpr std::array<std::string_view, kDesignCount> kDesignLabels = {
    "case_study", "ethnographic", "grounded_theory", "narrative", "phenomenology"};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) return std::nullopt;
  return value;
}

}  // namespace

std::string_view design_label(DesignType design) { return kDesignLabels[design_index(design)]; }

std::optional<DesignType> try_parse_design(std::string_view label) {
  for (std::size_t i = 0; i < kDesignCount; ++i) {
    if (kDesignLabels[i] == label) return kAllDesigns[i];
  }
  return std::nullopt;
}

DesignType parse_design(std::string_view label) {
  if (auto d = try_parse_design(label)) return *d;
  throw Error(ErrorCode::UnknownDesign, "unknown design label '" + std::string(label) + "'",
              "design");
}

std::optional<std::size_t> find_metric(std::string_view name) {
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    if (kMetricNames[i] == name) return i;
  }
  return std::nullopt;
}

bool ScoreScale::contains(int score) const {
  return std::find(allowed.begin(), allowed.end(), score) != allowed.end();
}

void validate_record(const StudyRecord& record, const ScoreScale& scale) {
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    if (!scale.contains(record.scores[j])) {
      throw Error(ErrorCode::InvalidScore,
                  "score " + std::to_string(record.scores[j]) + " is not an allowed value",
                  std::string(kMetricNames[j]));
    }
  }
  if (record.sample_size < 1) {
    throw Error(ErrorCode::InvalidSampleSize, "sample_size must be >= 1", "sample_size");
  }
}

std::array<std::size_t, kDesignCount> Dataset::design_counts() const {
  std::array<std::size_t, kDesignCount> counts{};
  for (const auto& r : records) ++counts[design_index(r.design)];
  return counts;
}

std::vector<double> Dataset::targets() const {
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(static_cast<double>(r.sample_size));
  return y;
}

Dataset parse_csv(std::string_view text, const ScoreScale& scale) {
  auto lines = split(text, '\n');
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::MissingColumn, "empty input, no header row", "", 1);

  const auto expected = split(kCsvHeader, ',');
  const auto header = split(lines.front(), ',');
  for (const auto& column : expected) {
    if (std::find(header.begin(), header.end(), column) == header.end()) {
      throw Error(ErrorCode::MissingColumn, "header lacks a required column",
                  std::string(column), 1);
    }
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i >= expected.size() || header[i] != expected[i]) {
      const bool known = std::find(expected.begin(), expected.end(), header[i]) != expected.end();
      throw Error(ErrorCode::UnknownColumn,
                  known ? "column out of order or duplicated" : "unexpected column",
                  std::string(header[i]), 1);
    }
  }

  Dataset dataset;
  dataset.provenance = Provenance::Ingested;
  dataset.records.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li + 1;
    const auto fields = split(lines[li], ',');
    if (fields.size() != expected.size()) {
      throw Error(ErrorCode::FieldCount,
                  "expected " + std::to_string(expected.size()) + " fields, found " +
                      std::to_string(fields.size()),
                  "", row);
    }
    StudyRecord record;
    auto design = try_parse_design(fields[0]);
    if (!design) {
      throw Error(ErrorCode::UnknownDesign,
                  "unknown design label '" + std::string(fields[0]) + "'", "design", row);
    }
    record.design = *design;
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      const std::string column(kMetricNames[j]);
      auto value = parse_int(fields[j + 1]);
      if (!value) {
        throw Error(ErrorCode::NonIntegerScore,
                    "'" + std::string(fields[j + 1]) + "' is not an integer", column, row);
      }
      if (*value < std::numeric_limits<int>::min() || *value > std::numeric_limits<int>::max() ||
          !scale.contains(static_cast<int>(*value))) {
        throw Error(ErrorCode::InvalidScore,
                    "score " + std::to_string(*value) + " is not an allowed value", column, row);
      }
      record.scores[j] = static_cast<int>(*value);
    }
    auto size = parse_int(fields.back());
    if (!size) {
      throw Error(ErrorCode::InvalidSampleSize,
                  "'" + std::string(fields.back()) + "' is not an integer", "sample_size", row);
    }
    if (*size < 1) {
      throw Error(ErrorCode::InvalidSampleSize, "sample_size must be >= 1", "sample_size", row);
    }
    record.sample_size = *size;
    dataset.records.push_back(record);
  }
  return dataset;
}

std::string serialize_csv(const Dataset& dataset) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : dataset.records) {
    out += design_label(r.design);
    for (int s : r.scores) {
      out += ',';
      out += std::to_string(s);
    }
    out += ',';
    out += std::to_string(r.sample_size);
    out += '\n';
  }
  return out;
}

Dataset balance_by_design(const Dataset& dataset, std::uint64_t seed) {
  const auto counts = dataset.design_counts();
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    if (counts[d] == 0) {
      throw Error(ErrorCode::MissingDesign,
                  "design '" + std::string(kDesignLabels[d]) + "' has no records", "design");
    }
  }
  const std::size_t target = *std::min_element(counts.begin(), counts.end());

  std::vector<bool> keep(dataset.size(), false);
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (design_index(dataset.records[i].design) == d) members.push_back(i);
    }
    if (members.size() > target) {
      auto rng = make_rng(seed, {0xba1a, d});
      std::shuffle(members.begin(), members.end(), rng);
      members.resize(target);
    }
    for (auto i : members) keep[i] = true;
  }

  Dataset out;
  out.provenance = Provenance::Derived;
  out.records.reserve(target * kDesignCount);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (keep[i]) out.records.push_back(dataset.records[i]);
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "test fraction must lie in (0, 1)", "test_fraction");
  }
  std::vector<bool> in_test(dataset.size(), false);
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (design_index(dataset.records[i].design) == d) members.push_back(i);
    }
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw Error(ErrorCode::EmptyGroup,
                  "stratum '" + std::string(kDesignLabels[d]) + "' needs at least 2 records",
                  "design");
    }
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    auto rng = make_rng(seed, {0x5b117, d});
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < n_test; ++k) in_test[members[k]] = true;
  }
  Dataset train, test;
  train.provenance = test.provenance = Provenance::Derived;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_test[i] ? test : train).records.push_back(dataset.records[i]);
  }
  return {std::move(train), std::move(test)};
}

DesignCalibration calibrate_lognormal(double mean, double median) {
  if (!(median > 0.0) || !(mean > median)) {
    throw Error(ErrorCode::InvalidArgument,
                "lognormal calibration needs mean > median > 0");
  }
  DesignCalibration c;
  c.target_mean = mean;
  c.target_median = median;
  c.mu = std::log(median);
  c.sigma = std::sqrt(2.0 * std::log(mean / median));
  return c;
}

GeneratorConfig default_generator_config() {
  GeneratorConfig cfg;
  // Per-design mean / median sample size of the reference corpus.
  cfg.designs[design_index(DesignType::CaseStudy)] = calibrate_lognormal(27.1, 10.0);
  cfg.designs[design_index(DesignType::EthnographicResearch)] = calibrate_lognormal(32.4, 20.0);
  cfg.designs[design_index(DesignType::GroundedTheory)] = calibrate_lognormal(26.7, 25.0);
  cfg.designs[design_index(DesignType::NarrativeResearch)] = calibrate_lognormal(14.6, 12.0);
  cfg.designs[design_index(DesignType::Phenomenology)] = calibrate_lognormal(18.0, 13.5);
  // Information power is informative everywhere. Each design also leans on
  // three metrics of its own, so metric effects differ across designs; the
  // rest carry only a faint signal.
  using M = Metric;
  const std::array<std::array<Metric, 3>, kDesignCount> emphasis = {{
      {M::ResearchScope, M::InterviewCount, M::Homogeneity},
      {M::ObservationDuration, M::Homogeneity, M::DataVariety},
      {M::ResearchScope, M::InterviewDuration, M::ParticipantOriginality},
      {M::InterviewDuration, M::InterviewCount, M::DataQuality},
      {M::ResearcherCompetence, M::ParticipantOriginality, M::DataQuality},
  }};
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    auto& w = cfg.designs[d].metric_weights;
    w.fill(0.1);
    for (auto m : emphasis[d]) w[metric_index(m)] = 0.8;
    w[metric_index(M::InformationPower)] = 1.0;
  }
  return cfg;
}

void GeneratorConfig::validate() const {
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    if (!(designs[d].sigma > 0.0) || !std::isfinite(designs[d].mu)) {
      throw Error(ErrorCode::InvalidArgument, "sigma must be > 0 for every design",
                  "sigma." + std::string(kDesignLabels[d]));
    }
  }
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "beta must lie in [0, 1]", "beta");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "flip probability must lie in [0, 0.5]", "flip");
  }
  if (per_design < 1) {
    throw Error(ErrorCode::InvalidArgument, "record count per design must be >= 1",
                "per_design");
  }
  if (levels.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "need at least two score levels", "levels");
  }
  if (!std::is_sorted(levels.begin(), levels.end())) {
    throw Error(ErrorCode::InvalidArgument, "score levels must be ascending", "levels");
  }
  for (const auto& design : designs) {
    for (double w : design.metric_weights) {
      if (!(w >= 0.0 && w <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "metric weights must lie in [0, 1]",
                    "metric_weights");
      }
    }
  }
}

Dataset synthesize_dataset(const GeneratorConfig& config) {
  config.validate();
  const std::size_t n_levels = config.levels.size();
  std::vector<double> thresholds;
  for (std::size_t k = 1; k < n_levels; ++k) {
    thresholds.push_back(
        stats::normal_quantile(static_cast<double>(k) / static_cast<double>(n_levels)));
  }

  Dataset out;
  out.provenance = Provenance::Synthetic;
  out.records.reserve(config.per_design * kDesignCount);
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    const auto& cal = config.designs[d];
    for (std::size_t r = 0; r < config.per_design; ++r) {
      // One stream per record: output never depends on generation order.
      auto rng = make_rng(config.seed, {0x5e17, d, r});
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::uniform_int_distribution<std::size_t> pick(0, n_levels - 1);

      StudyRecord rec;
      rec.design = kAllDesigns[d];
      const double log_size = cal.mu + cal.sigma * normal(rng);
      rec.sample_size = std::max<std::int64_t>(1, std::llround(std::exp(log_size)));
      // Latent position of the realized (integer) size within its design.
      const double z = (std::log(static_cast<double>(rec.sample_size)) - cal.mu) / cal.sigma;

      for (std::size_t j = 0; j < kMetricCount; ++j) {
        const double rho = config.beta * cal.metric_weights[j];
        const double noise = normal(rng);
        const double latent = rho * z + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * noise;
        std::size_t level = 0;
        for (double t : thresholds) level += latent > t ? 1 : 0;
        const double u = unit(rng);
        const std::size_t redraw = pick(rng);
        if (u < config.flip_probability) level = redraw;
        // Higher points always mean "more participants needed".
        rec.scores[j] = config.levels[level];
      }
      out.records.push_back(rec);
    }
  }
  return out;
}

ColumnStats column_stats(std::vector<double> values) {
  if (values.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "descriptive statistics need n >= 2");
  }
  ColumnStats s;
  s.mean = stats::mean(values);
  s.std = stats::sample_std(values);
  s.skewness = stats::skewness(values);
  s.kurtosis = stats::excess_kurtosis(values);
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.q1 = stats::percentile_sorted(values, 0.25);
  s.median = stats::percentile_sorted(values, 0.5);
  s.q3 = stats::percentile_sorted(values, 0.75);
  return s;
}

std::vector<std::pair<std::string, ColumnStats>> descriptive_stats(const Dataset& dataset) {
  if (dataset.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "descriptive statistics need n >= 2");
  }
  std::vector<std::pair<std::string, ColumnStats>> out;
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    std::vector<double> column;
    column.reserve(dataset.size());
    for (const auto& r : dataset.records) column.push_back(r.scores[j]);
    out.emplace_back(std::string(kMetricNames[j]), column_stats(std::move(column)));
  }
  out.emplace_back("sample_size", column_stats(dataset.targets()));
  return out;
}

}  // namespace qsat
