#include <gtest/gtest.h>

#include <random>

#include "qsat/bundle.hpp"
#include "qsat/service.hpp"
#include "test_support.hpp"

namespace qsat {
namespace {

using testing::fixture_bundle;

std::vector<PredictionRequest> random_requests(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::array<int, 3> levels = {15, 20, 25};
  std::vector<PredictionRequest> out(n);
  for (auto& req : out) {
    req.design = kAllDesigns[rng() % kDesignCount];
    for (auto& s : req.scores) s = levels[rng() % 3];
    req.alpha = 0.05 + 0.05 * static_cast<double>(rng() % 5);
  }
  return out;
}

TEST(Bundle, SaveLoadPredictsIdentically) {
  const auto& bundle = fixture_bundle();
  const auto dir = testing::temp_dir("bundle_roundtrip");
  save_bundle(bundle, dir / "copy.qsat.json");
  const auto back = load_bundle(dir / "copy.qsat.json");
  for (const auto& req : random_requests(100, 7)) {
    const auto row = bundle.pipeline.transform_row(req.design, req.scores);
    const auto row_back = back.pipeline.transform_row(req.design, req.scores);
    ASSERT_EQ(row, row_back);
    for (const auto& [kind, model] : bundle.models) {
      EXPECT_NEAR(back.models.at(kind)->predict_one(row), model->predict_one(row), 1e-12)
          << kind_name(kind);
    }
    ASSERT_TRUE(back.stacked.has_value());
    EXPECT_NEAR(back.stacked->predict_one(row), bundle.stacked->predict_one(row), 1e-12);
    EXPECT_EQ(handle_predict(back, req).dump(), handle_predict(bundle, req).dump());
  }
}

TEST(Bundle, SaveLoadSaveIsByteIdentical) {
  const auto dir = testing::temp_dir("bundle_bytes");
  save_bundle(fixture_bundle(), dir / "a.qsat.json");
  save_bundle(load_bundle(dir / "a.qsat.json"), dir / "b.qsat.json");
  EXPECT_EQ(testing::slurp(dir / "a.qsat.json"), testing::slurp(dir / "b.qsat.json"));
  EXPECT_EQ(testing::slurp(dir / "a.qsat.json"), testing::slurp(testing::fixture_bundle_path()));
}

TEST(Bundle, ModelVersionIsContentHash) {
  const auto& bundle = fixture_bundle();
  EXPECT_EQ(bundle.model_version.size(), 16u);
  EXPECT_EQ(compute_model_version(bundle), bundle.model_version);
  auto changed = bundle;
  changed.report["timestamp"] = "1999-01-01T00:00:00Z";
  EXPECT_EQ(compute_model_version(changed), bundle.model_version);
  changed.metadata["seed"] = 12345;
  EXPECT_NE(compute_model_version(changed), bundle.model_version);
}

nlohmann::json fixture_json() {
  return nlohmann::json::parse(testing::slurp(testing::fixture_bundle_path()));
}

ErrorCode load_error(const nlohmann::json& j, std::string* field = nullptr) {
  try {
    bundle_from_json(j);
  } catch (const Error& e) {
    if (field) *field = e.field();
    return e.code();
  }
  ADD_FAILURE() << "bundle loaded without error";
  return ErrorCode::FitFailure;
}

TEST(Bundle, VersionMismatchIsFatal) {
  auto j = fixture_json();
  j["format_version"] = 99;
  EXPECT_EQ(load_error(j), ErrorCode::VersionMismatch);
}

TEST(Bundle, MissingModelIsNamed) {
  auto j = fixture_json();
  j["models"].erase("ridge");
  std::string field;
  EXPECT_EQ(load_error(j, &field), ErrorCode::MissingModel);
  EXPECT_EQ(field, "ridge");
}

TEST(Bundle, SchemaErrorsCarryJsonPointer) {
  auto j = fixture_json();
  j["conformal"].erase("scores");
  std::string field;
  EXPECT_EQ(load_error(j, &field), ErrorCode::Schema);
  EXPECT_EQ(field, "/conformal");

  auto k = fixture_json();
  k["models"]["knn"]["state"] = "garbage";
  EXPECT_EQ(load_error(k, &field), ErrorCode::Schema);
  EXPECT_EQ(field, "/models/knn");
}

TEST(Bundle, TruncatedFileIsSchemaError) {
  const auto dir = testing::temp_dir("bundle_truncated");
  const auto text = testing::slurp(testing::fixture_bundle_path());
  write_file(dir / "cut.qsat.json", text.substr(0, text.size() / 2));
  try {
    load_bundle(dir / "cut.qsat.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Schema);
  }
}

TEST(Bundle, MissingFileIsIoError) {
  try {
    load_bundle("/nonexistent/dir/x.qsat.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Bundle, FixtureCarriesMetadataAndCalibration) {
  const auto& bundle = fixture_bundle();
  EXPECT_EQ(bundle.models.size(), 10u);  // nine plus lasso
  EXPECT_TRUE(bundle.metadata.contains("seed"));
  EXPECT_TRUE(bundle.metadata.contains("fingerprint"));
  EXPECT_TRUE(bundle.metadata.contains("grids"));
  EXPECT_GT(bundle.conformal.size(), 0u);
  EXPECT_EQ(bundle.conformal.protocol(), "test_split");
}

}  // namespace
}  // namespace qsat
