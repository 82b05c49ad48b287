#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "etriage/cli.hpp"
#include "test_support.hpp"

namespace etriage {
namespace {

namespace fs = std::filesystem;
using testing::fresh_temp_dir;
using testing::read_file;
using testing::write_file;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "etriage");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kData =
    "example_id,label,severity,y_1,y_2,y_3\n"
    "a,0,0,0.05,0.10,0.02\n"
    "b,1,2,0.40,0.45,0.30\n"
    "c,0,1,0.20,0.60,0.10\n"
    "d,1,4,0.90,0.95,0.80\n"
    "e,1,3,0.30,0.20,0.25\n"
    "f,0,0,0.01,0.02,0.03\n";

fs::path dataset_in(const fs::path& dir) {
  write_file(dir / "d.csv", kData);
  return dir / "d.csv";
}

std::size_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

TEST(Cli, ScoreWritesCsvJsonAndSidecar) {
  const auto dir = fresh_temp_dir("cli_score");
  const auto r = run({"score", "-i", dataset_in(dir).string(), "--metric", "mean,var",
                      "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(dir / "o" / "scores_var.csv");
  EXPECT_EQ(csv.substr(0, 17), "example_id,score\n");
  EXPECT_EQ(lines(csv), 7u);
  const auto meta = nlohmann::json::parse(read_file(dir / "o" / "scores_mean.meta.json"));
  EXPECT_EQ(meta["tau"], 0.5);
  EXPECT_EQ(meta["n_examples"], 6);
  const auto man = nlohmann::json::parse(read_file(dir / "o" / "manifest.json"));
  EXPECT_EQ(man["command"], "score");
  EXPECT_EQ(man["outputs"].size(), 6u);
}

TEST(Cli, GlobalOptionsBeforeSubcommandToo) {
  const auto dir = fresh_temp_dir("cli_order");
  const auto r = run({"--out", (dir / "o").string(), "--threads", "2", "score", "-i",
                      dataset_in(dir).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "o" / "scores_mean.csv"));
}

TEST(Cli, UsageAndDataErrorsMapToExitCodes) {
  const auto dir = fresh_temp_dir("cli_errors");
  const auto in = dataset_in(dir).string();
  auto r = run({"score", "-i", in, "--tau", "1.5", "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("tau"), std::string::npos) << r.err;
  r = run({"score", "-i", (dir / "missing.csv").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  r = run({"score", "-i", in, "--metric", "bogus"});
  EXPECT_EQ(r.code, 2);
  r = run({"score"});
  EXPECT_EQ(r.code, 2);
  r = run({});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir / "o"));
  r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("verify-theory"), std::string::npos);
}

TEST(Cli, TriageTableHasOneRowPerCell) {
  const auto dir = fresh_temp_dir("cli_triage");
  const auto r = run({"triage", "-i", dataset_in(dir).string(), "--tag", "toy", "--out",
                      (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(dir / "o" / "triage.csv");
  EXPECT_EQ(lines(csv), 1u + 3u * 5u);
  EXPECT_EQ(csv.rfind("ensemble,q,metric,fn_found,n_uncertain,fnp_pct,remaining_fn,reduction_pct\n", 0), 0u);
  EXPECT_NE(csv.find("toy,"), std::string::npos);
}

TEST(Cli, TriageZeroRateRowsAreTheBaseline) {
  const auto dir = fresh_temp_dir("cli_triage0");
  const auto r = run({"triage", "-i", dataset_in(dir).string(), "--q", "0", "--metrics", "mean",
                      "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // b and e are false negatives (means 0.383, 0.25); none found, fnp undefined
  EXPECT_NE(read_file(dir / "o" / "triage.csv").find(",0,mean,0,0,,2,0"), std::string::npos)
      << read_file(dir / "o" / "triage.csv");
}

TEST(Cli, TriageWithoutNegativesIsAnError) {
  const auto dir = fresh_temp_dir("cli_triage_pos");
  write_file(dir / "p.csv", "example_id,label,severity,y_1\na,1,,0.9\nb,0,,0.7\n");
  const auto r = run({"triage", "-i", (dir / "p.csv").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("negative"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "o" / "triage.csv"));
}

TEST(Cli, SeverityHistogramAndFit) {
  const auto dir = fresh_temp_dir("cli_misc");
  const auto in = dataset_in(dir).string();
  const auto o = (dir / "o").string();
  auto r = run({"severity", "-i", in, "--theta", "50", "--metrics", "mean", "--out", o});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(read_file(dir / "o" / "severity.csv")), 2u);
  r = run({"histogram", "-i", in, "--metric", "var", "--bins", "4", "--out", o});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(read_file(dir / "o" / "histogram_var.csv")), 5u);
  r = run({"fit-beta", "-i", in, "--out", o});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto fit = read_file(dir / "o" / "fit_beta.csv");
  EXPECT_EQ(lines(fit), 7u);
  r = run({"histogram", "-i", in, "--bins", "0", "--out", o});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, VerifyTheoryFewTrialsWarnsAndSkips) {
  const auto dir = fresh_temp_dir("cli_verify_few");
  const auto r = run({"verify-theory", "--trials", "10", "--corollary-n", "0", "--out",
                      (dir / "o").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("standard errors too large"), std::string::npos);
  EXPECT_NE(r.out.find("SKIP "), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL "), std::string::npos);
  const auto man = nlohmann::json::parse(read_file(dir / "o" / "manifest.json"));
  EXPECT_EQ(man["config"]["trials"], 10);
  EXPECT_EQ(man["config"]["seed"], 20200915u);
}

TEST(Cli, VerifyTheorySwappedAlphasIsUsageError) {
  const auto dir = fresh_temp_dir("cli_verify_swap");
  const auto r = run({"verify-theory", "--alpha-i", "4", "--alpha-j", "2", "--out",
                      (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpha_i < alpha_j"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "o" / "theory_report.json"));
  EXPECT_FALSE(fs::exists(dir / "o" / "manifest.json"));
}

TEST(Cli, VerifyTheorySeedFromEnvironment) {
  const auto dir = fresh_temp_dir("cli_verify_env");
  ::setenv("ET_SEED", "77", 1);
  auto r = run({"verify-theory", "--trials", "2000", "--n", "5", "--corollary-n", "0", "--out",
                (dir / "a").string()});
  ::unsetenv("ET_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"verify-theory", "--trials", "2000", "--n", "5", "--corollary-n", "0", "--seed", "77",
           "--out", (dir / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"theory_report.json", "theory_report.csv", "manifest.json"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  ::setenv("ET_SEED", "x1", 1);
  r = run({"verify-theory", "--trials", "10", "--out", (dir / "c").string()});
  ::unsetenv("ET_SEED");
  EXPECT_EQ(r.code, 2);
}

}  // namespace
}  // namespace etriage
