#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "qsat/data_model.hpp"
#include "qsat/error.hpp"
#include "qsat/stats.hpp"

namespace qsat {
namespace {

std::string csv_with(const std::string& row) { return std::string(kCsvHeader) + "\n" + row + "\n"; }

StudyRecord record(DesignType design, std::int64_t n, int score = 15) {
  StudyRecord r;
  r.design = design;
  r.scores.fill(score);
  r.sample_size = n;
  return r;
}

Dataset dataset_with_counts(const std::array<std::size_t, kDesignCount>& counts) {
  Dataset ds;
  std::int64_t n = 1;
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    for (std::size_t i = 0; i < counts[d]; ++i) ds.records.push_back(record(kAllDesigns[d], n++));
  }
  return ds;
}

template <typename F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no qsat::Error thrown";
  return ErrorCode::FitFailure;
}

// ---------------------------------------------------------------------------

TEST(ParseCsv, SingleValidRow) {
  const auto ds = parse_csv(csv_with("phenomenology,15,15,15,15,15,15,15,15,15,15,12"));
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.records[0].design, DesignType::Phenomenology);
  EXPECT_EQ(ds.records[0].sample_size, 12);
  EXPECT_EQ(ds.provenance, Provenance::Ingested);
}

TEST(ParseCsv, UnknownDesignNamesRow) {
  try {
    parse_csv(csv_with("oral_history,15,15,15,15,15,15,15,15,15,15,12"));
    FAIL() << "expected UnknownDesign";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownDesign);
    ASSERT_TRUE(e.row().has_value());
    EXPECT_EQ(*e.row(), 2u);
  }
}

TEST(ParseCsv, InvalidScoreNamesRowAndColumn) {
  try {
    parse_csv(csv_with("phenomenology,17,15,15,15,15,15,15,15,15,15,12"));
    FAIL() << "expected InvalidScore";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidScore);
    EXPECT_EQ(*e.row(), 2u);
    EXPECT_EQ(e.field(), "research_scope");
  }
}

TEST(ParseCsv, RejectsNonPositiveSampleSize) {
  EXPECT_EQ(error_code_of([] { parse_csv(csv_with("narrative,15,15,15,15,15,15,15,15,15,15,0")); }),
            ErrorCode::InvalidSampleSize);
}

TEST(ParseCsv, RejectsMissingColumn) {
  EXPECT_EQ(error_code_of([] { parse_csv("design,sample_size\nnarrative,3\n"); }),
            ErrorCode::MissingColumn);
}

TEST(ParseCsv, SerializeRoundTrip) {
  Dataset ds;
  ds.records = {record(DesignType::CaseStudy, 7, 20), record(DesignType::NarrativeResearch, 3, 25)};
  const auto back = parse_csv(serialize_csv(ds));
  EXPECT_EQ(back.records, ds.records);
}

// ---------------------------------------------------------------------------

TEST(BalanceByDesign, ReferenceCountsBalanceToSmallestGroup) {
  // case study 219, ethnographic 80, grounded theory 151, narrative 120, phenomenology 151
  const auto balanced = balance_by_design(dataset_with_counts({219, 80, 151, 120, 151}), 3);
  EXPECT_EQ(balanced.size(), 400u);
  for (auto c : balanced.design_counts()) EXPECT_EQ(c, 80u);
}

TEST(BalanceByDesign, BalancedInputIsFixedPoint) {
  const auto ds = dataset_with_counts({10, 10, 10, 10, 10});
  EXPECT_EQ(balance_by_design(ds, 11).records, ds.records);
}

TEST(BalanceByDesign, SeededAndDeterministic) {
  const auto ds = dataset_with_counts({3, 2, 2, 2, 2});
  const auto a = balance_by_design(ds, 7);
  const auto b = balance_by_design(ds, 7);
  for (auto c : a.design_counts()) EXPECT_EQ(c, 2u);
  EXPECT_EQ(serialize_csv(a), serialize_csv(b));
}

TEST(BalanceByDesign, MissingDesignIsAnError) {
  EXPECT_EQ(error_code_of([] { balance_by_design(dataset_with_counts({3, 0, 2, 2, 2}), 1); }),
            ErrorCode::MissingDesign);
}

// ---------------------------------------------------------------------------

TEST(TrainTestSplit, StratifiedCounts) {
  const auto [train, test] = train_test_split(dataset_with_counts({20, 20, 20, 20, 20}), 0.2, 1);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(test.size(), 20u);
  for (auto c : test.design_counts()) EXPECT_EQ(c, 4u);
}

TEST(TrainTestSplit, Deterministic) {
  const auto ds = dataset_with_counts({20, 20, 20, 20, 20});
  const auto a = train_test_split(ds, 0.2, 1);
  const auto b = train_test_split(ds, 0.2, 1);
  EXPECT_EQ(a.first.records, b.first.records);
  EXPECT_EQ(a.second.records, b.second.records);
}

TEST(TrainTestSplit, HalvesAreDisjointAndComplete) {
  const auto ds = dataset_with_counts({2, 2, 2, 2, 2});
  const auto [train, test] = train_test_split(ds, 0.5, 9);
  EXPECT_EQ(train.size(), 5u);
  EXPECT_EQ(test.size(), 5u);
  // Sample sizes are unique ids in this fixture.
  std::vector<std::int64_t> ids;
  for (const auto& r : train.records) ids.push_back(r.sample_size);
  for (const auto& r : test.records) ids.push_back(r.sample_size);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], static_cast<std::int64_t>(i + 1));
}

// ---------------------------------------------------------------------------

TEST(Generator, PerDesignMeansMatchReferenceWithin15Percent) {
  auto cfg = default_generator_config();
  cfg.per_design = 500;
  const auto ds = synthesize_dataset(cfg);
  const std::map<DesignType, double> reference = {
      {DesignType::EthnographicResearch, 32.4}, {DesignType::GroundedTheory, 26.7},
      {DesignType::CaseStudy, 27.1},            {DesignType::Phenomenology, 18.0},
      {DesignType::NarrativeResearch, 14.6}};
  for (const auto& [design, target] : reference) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : ds.records) {
      if (r.design == design) {
        sum += static_cast<double>(r.sample_size);
        ++n;
      }
    }
    ASSERT_EQ(n, 500u);
    EXPECT_NEAR(sum / 500.0, target, 0.15 * target) << design_label(design);
  }
}

TEST(Generator, NoSignalMeansIndependentScores) {
  auto cfg = default_generator_config();
  cfg.beta = 0.0;
  cfg.flip_probability = 0.5;
  cfg.per_design = 400;
  const auto ds = synthesize_dataset(cfg);
  ASSERT_EQ(ds.size(), 2000u);
  const auto y = ds.targets();
  for (std::size_t j = 0; j < kMetricCount; ++j) {
    std::vector<double> column;
    for (const auto& r : ds.records) column.push_back(r.scores[j]);
    EXPECT_LT(std::abs(stats::spearman(column, y)), 0.1) << kMetricNames[j];
  }
}

TEST(Generator, NoiselessInformationPowerIsStepFunctionOfSize) {
  auto cfg = default_generator_config();
  cfg.beta = 1.0;
  cfg.flip_probability = 0.0;
  cfg.per_design = 300;
  const auto ds = synthesize_dataset(cfg);
  for (auto design : kAllDesigns) {
    std::vector<std::pair<std::int64_t, int>> pairs;
    for (const auto& r : ds.records) {
      if (r.design == design) pairs.emplace_back(r.sample_size, r.score(Metric::InformationPower));
    }
    std::sort(pairs.begin(), pairs.end());
    std::size_t violations = 0;
    for (std::size_t i = 1; i < pairs.size(); ++i) {
      if (pairs[i].second < pairs[i - 1].second) ++violations;
      if (pairs[i].first == pairs[i - 1].first && pairs[i].second != pairs[i - 1].second) {
        ++violations;
      }
    }
    EXPECT_EQ(violations, 0u) << design_label(design);
  }
}

TEST(Generator, ByteIdenticalForSameSeed) {
  const auto cfg = default_generator_config();
  EXPECT_EQ(serialize_csv(synthesize_dataset(cfg)), serialize_csv(synthesize_dataset(cfg)));
  auto other = cfg;
  other.seed = 43;
  EXPECT_NE(serialize_csv(synthesize_dataset(cfg)), serialize_csv(synthesize_dataset(other)));
}

TEST(Generator, ScoresComeFromConfiguredLevels) {
  const auto ds = synthesize_dataset(default_generator_config());
  for (const auto& r : ds.records) {
    for (int s : r.scores) EXPECT_TRUE(s == 15 || s == 20 || s == 25);
    EXPECT_GE(r.sample_size, 1);
  }
}

TEST(Generator, RejectsOutOfRangeFlip) {
  auto cfg = default_generator_config();
  cfg.flip_probability = 0.6;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(CalibrateLognormal, MomentsRoundTrip) {
  const auto c = calibrate_lognormal(26.7, 25.0);
  EXPECT_NEAR(std::exp(c.mu), 25.0, 1e-12);
  EXPECT_NEAR(std::exp(c.mu + c.sigma * c.sigma / 2.0), 26.7, 1e-12);
}

// ---------------------------------------------------------------------------

TEST(ColumnStats, ConstantColumn) {
  const auto s = column_stats({5, 5, 5, 5});
  EXPECT_EQ(s.std, 0.0);
  EXPECT_EQ(s.skewness, 0.0);
}

TEST(ColumnStats, QuartilesByLinearInterpolation) {
  const auto s = column_stats({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.q1, 2.0);
  EXPECT_DOUBLE_EQ(s.q3, 4.0);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 5.0);
}

TEST(DescriptiveStats, OneRowPerColumn) {
  const auto stats = descriptive_stats(synthesize_dataset(default_generator_config()));
  ASSERT_EQ(stats.size(), kMetricCount + 1);
  EXPECT_EQ(stats.back().first, "sample_size");
  EXPECT_EQ(stats.front().first, "research_scope");
}

}  // namespace
}  // namespace qsat
