#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "etriage/data_model.hpp"
#include "etriage/error.hpp"
#include "test_support.hpp"

namespace etriage {
namespace {

using testing::record;

EnsembleDataset parse(const std::string& text, LoadOptions opts = {}) {
  std::istringstream in(text);
  return parse_dataset(in, opts, "t.csv");
}

std::string error_of(const std::string& text, LoadOptions opts = {}) {
  try {
    parse(text, opts);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

TEST(DataModel, LoadsValidFile) {
  const auto ds = parse(
      "example_id,label,severity,y_1,y_2\n"
      "a,0,0,0.1,0.2\n"
      "b,1,3,0.9,0.7\n"
      "c,1,,0.5,0.6\n");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.ensemble_size(), 2u);
  EXPECT_EQ(ds[0].example_id, "a");
  EXPECT_EQ(ds[1].severity, 3);
  EXPECT_FALSE(ds[2].severity.has_value());
  EXPECT_EQ(ds[2].members, (std::vector<double>{0.5, 0.6}));
  EXPECT_FALSE(ds.all_have_severity());
}

TEST(DataModel, AcceptsCrlfAndTrailingBlankLines) {
  const auto ds = parse("example_id,label,severity,y_1\r\nx,0,,0.25\r\n\r\n");
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].members[0], 0.25);
}

TEST(DataModel, ProbabilityOutOfRangeNamesRowAndValue) {
  const auto msg = error_of("example_id,label,severity,y_1,y_2\na,0,,0.1,0.2\nb,0,,1.3,0.2\n");
  EXPECT_NE(msg.find("t.csv:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("1.3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("y_1"), std::string::npos) << msg;
}

TEST(DataModel, MixedEnsembleSizesRejected) {
  const auto msg = error_of("example_id,label,severity,y_1,y_2\na,0,,0.1,0.2\nb,0,,0.1,0.2,0.3\n");
  EXPECT_NE(msg.find("inconsistent ensemble size"), std::string::npos) << msg;
  EXPECT_THROW(EnsembleDataset({record("a", 0, {0.1, 0.2}), record("b", 0, {0.1, 0.2, 0.3})}),
               DataError);
}

TEST(DataModel, MalformedFieldsReportLineAndField) {
  EXPECT_NE(error_of("example_id,label,severity,y_1\na,x,,0.1\n").find("field 'label'"),
            std::string::npos);
  EXPECT_NE(error_of("example_id,label,severity,y_1\na,0,,abc\n").find("field 'y_1'"),
            std::string::npos);
  EXPECT_NE(error_of("example_id,label,severity,y_1\na,2,,0.5\n").find("t.csv:2"),
            std::string::npos);
  EXPECT_NE(error_of("example_id,label,severity,y_1\na,0,7,0.5\n").find("severity"),
            std::string::npos);
  EXPECT_NE(error_of("id,label,severity,y_1\na,0,,0.5\n").find("header"), std::string::npos);
  EXPECT_NE(error_of("example_id,label,severity,y_2\na,0,,0.5\n").find("y_1"),
            std::string::npos);
  EXPECT_NE(error_of("").find("empty"), std::string::npos);
  EXPECT_NE(error_of("example_id,label,severity,y_1\n").find("no records"), std::string::npos);
}

TEST(DataModel, DuplicateIdsRejected) {
  const auto msg = error_of("example_id,label,severity,y_1\na,0,,0.1\na,1,,0.9\n");
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(DataModel, SeverityConsistencyCheckCanBeDisabled) {
  const std::string text = "example_id,label,severity,y_1\na,1,1,0.4\n";
  EXPECT_NE(error_of(text).find("inconsistent with severity"), std::string::npos);
  EXPECT_NO_THROW(parse(text, LoadOptions{false}));
  EXPECT_NO_THROW(parse("example_id,label,severity,y_1\na,1,2,0.4\nb,0,1,0.4\n"));
}

TEST(DataModel, EnsembleOutputIsArithmeticMean) {
  EXPECT_DOUBLE_EQ(ensemble_output(record("a", 0, {0.2, 0.4})), 0.3);
  EXPECT_EQ(ensemble_output(record("a", 0, {0.37})), 0.37);
  EXPECT_EQ(ensemble_output(record("a", 0, {0.0, 1.0})), 0.5);
  EXPECT_EQ(ensemble_output(record("a", 0, {0.3, 0.3, 0.3})), 0.3);
}

TEST(DataModel, PredictedLabelTieGoesPositive) {
  DecisionConfig cfg;
  EXPECT_EQ(predicted_label(record("a", 0, {0.5}), cfg), 1);
  EXPECT_EQ(predicted_label(record("a", 0, {0.49}), cfg), 0);
  cfg.tau = 0.9;
  EXPECT_EQ(predicted_label(record("a", 0, {0.7}), cfg), 0);
  EXPECT_EQ(predicted_label(record("a", 0, {0.4, 0.6}), DecisionConfig{}), 1);
}

TEST(DataModel, DecisionConfigValidation) {
  EXPECT_THROW((DecisionConfig{1.5, 1e-12}.validate()), UsageError);
  EXPECT_THROW((DecisionConfig{0.0, 1e-12}.validate()), UsageError);
  EXPECT_THROW((DecisionConfig{0.5, 0.5}.validate()), UsageError);
  EXPECT_THROW((DecisionConfig{0.5, 0.0}.validate()), UsageError);
  EXPECT_NO_THROW(DecisionConfig{}.validate());
}

// Round trip through the CSV text is bit-exact for arbitrary doubles.
TEST(DataModelProperty, SaveLoadRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> sl(0, 4);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<PredictionRecord> records;
    const std::size_t k = 1 + iter % 6;
    for (int i = 0; i < 40; ++i) {
      std::vector<double> m(k);
      for (auto& y : m) y = u(rng);
      if (i == 0) m[0] = 5e-324;  // subnormal survives
      std::optional<int> sev;
      int label = i % 2;
      if (i % 3 == 0) {
        sev = sl(rng);
        label = *sev >= 2 ? 1 : 0;
      }
      records.push_back(record("r" + std::to_string(i), label, std::move(m), sev));
    }
    const EnsembleDataset ds(std::move(records));
    std::ostringstream out;
    write_dataset(out, ds);
    std::istringstream in(out.str());
    EXPECT_EQ(parse_dataset(in), ds);
  }
  const auto dir = testing::fresh_temp_dir("roundtrip");
  const EnsembleDataset ds({record("a", 0, {0.1, 1.0 / 3.0}, 1), record("b", 1, {0.9, 0.7})});
  save_dataset(dir / "d.csv", ds);
  EXPECT_EQ(load_dataset(dir / "d.csv"), ds);
  EXPECT_THROW(load_dataset(dir / "missing.csv"), DataError);
}

TEST(DataModelProperty, PredictedLabelMonotoneInEachMember) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<double> m(1 + iter % 5);
    for (auto& y : m) y = u(rng);
    DecisionConfig cfg{0.05 + 0.9 * u(rng), 1e-12};
    const int before = predicted_label(ensemble_output(m), cfg);
    const std::size_t idx = iter % m.size();
    m[idx] = m[idx] + (1.0 - m[idx]) * u(rng);
    EXPECT_GE(predicted_label(ensemble_output(m), cfg), before);
  }
}

TEST(DataModelProperty, EnsembleOutputPermutationInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> m(2 + iter % 7);
    for (auto& y : m) y = u(rng);
    const double base = ensemble_output(m);
    std::shuffle(m.begin(), m.end(), rng);
    EXPECT_NEAR(ensemble_output(m), base, 1e-15);
  }
}

}  // namespace
}  // namespace etriage
