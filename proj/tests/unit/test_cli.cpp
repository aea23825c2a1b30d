#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "nca/config.hpp"
#include "oracles.hpp"

using namespace nca;
using test::read_file;
using test::run_ca;
using test::TempDir;
using test::write_file;

namespace {

const std::string kData = NCA_TEST_DATA_DIR;

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(read_file(p)); }

std::string fixture_args(const TempDir& dir) {
  return "--config " + q(kData + "/expenses20.ini") + " --out " + q(dir.path());
}

bool config_fails(const std::string& text) {
  std::istringstream is(text);
  try {
    config_from_entries(read_config_entries(is, "t"), {});
  } catch (const Error& e) {
    return e.code() == Errc::Config;
  }
  return false;
}

}  // namespace

TEST(Config, DefaultsAndSections) {
  std::istringstream is("[paths]\ninput = data.csv\n[train]\nd = 3\nf_hidden = 10, 5\ncenter = no\n[plane]\naxes = 2,3\n");
  const RunConfig c = config_from_entries(read_config_entries(is, "t"), "/base");
  EXPECT_EQ(c.paths.input, std::filesystem::path("/base/data.csv"));
  EXPECT_EQ(c.paths.dataset_path(), std::filesystem::path("out/dataset.json"));
  EXPECT_EQ(c.train.d, 3);
  EXPECT_EQ(c.train.f_hidden, (std::vector<Index>{10, 5}));
  EXPECT_FALSE(c.train.center);
  EXPECT_EQ(c.train.epochs, 20);
  EXPECT_EQ(c.plane.axes.first, 2);
  EXPECT_EQ(c.plane.axes.second, 3);
  EXPECT_EQ(c.ingest.min_category_count, 500u);
  EXPECT_DOUBLE_EQ(c.ingest.split_ratio, 0.7);
}

TEST(Config, OverridesWinAndSeedPropagates) {
  std::istringstream is("[run]\nseed = 3\n[train]\nepochs = 5\n");
  ConfigEntries e = read_config_entries(is, "t");
  apply_overrides(e, {"train.epochs=0", "run.seed=11"});
  const RunConfig c = config_from_entries(e, {});
  EXPECT_EQ(c.train.epochs, 0);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.train.seed, 11u);
  EXPECT_THROW(apply_overrides(e, {"novalue"}), Error);
}

TEST(Config, RejectsUnknownAndInvalid) {
  EXPECT_TRUE(config_fails("[train]\nepoch = 3\n"));
  EXPECT_TRUE(config_fails("[nope]\nx = 1\n"));
  EXPECT_TRUE(config_fails("[train]\nd = three\n"));
  EXPECT_TRUE(config_fails("[train]\nbatch_size = -4\n"));
  EXPECT_TRUE(config_fails("[ingest]\nsplit_ratio = 1.5\n"));
  EXPECT_TRUE(config_fails("[ingest]\nterm_start = 2019-01-01\nterm_end = 2018-01-01\n"));
  EXPECT_TRUE(config_fails("[plane]\nquantiles = 0.9, 0.1\n"));
  EXPECT_TRUE(config_fails("[plane]\naxes = 1\n"));
  EXPECT_TRUE(config_fails("[train]\ncenter = maybe\n"));
  EXPECT_TRUE(config_fails("[schema]\nfoo = bar\n"));
  EXPECT_FALSE(config_fails("[schema]\nmember_id = ideCadastro\n"));
}

TEST(Config, FilePathsAnchorToConfigDirectory) {
  const TempDir dir("cfg");
  write_file(dir / "run.ini", "[paths]\ninput = in.csv\nout = results\n");
  const RunConfig c = load_config(dir / "run.ini");
  EXPECT_EQ(c.paths.input, dir / "in.csv");
  EXPECT_EQ(c.paths.out, dir / "results");
  const RunConfig o = load_config(dir / "run.ini", {"paths.out=elsewhere"});
  EXPECT_EQ(o.paths.out, std::filesystem::path("elsewhere"));
  EXPECT_THROW(load_config(dir / "missing.ini"), Error);
}

TEST(Cli, UsageAndConfigErrorsExitOne) {
  EXPECT_EQ(run_ca(""), 1);
  EXPECT_EQ(run_ca("bogus --config x"), 1);
  EXPECT_EQ(run_ca("ingest"), 1);
  EXPECT_EQ(run_ca("ingest --config /nonexistent/config.ini"), 1);
  const TempDir dir("cli");
  write_file(dir / "bad.ini", "[train]\nunknown_key = 1\n");
  EXPECT_EQ(run_ca("train --config " + q(dir / "bad.ini")), 1);
  EXPECT_EQ(run_ca("--help"), 0);
}

TEST(Cli, IngestHandTally) {
  const TempDir dir("cli");
  ASSERT_EQ(run_ca("ingest " + fixture_args(dir)), 0);
  const auto r = read_json(dir / "ingest_report.json");
  EXPECT_EQ(r["rows_read"], 20);
  EXPECT_EQ(r["parse"]["errors"], 2);
  EXPECT_EQ(r["parse"]["causes"]["negative-value"], 1);
  EXPECT_EQ(r["parse"]["causes"]["invalid-date"], 1);
  EXPECT_EQ(r["parse"]["rows"][0]["row"], 18);
  EXPECT_EQ(r["filter"]["dropped_term"], 1);
  EXPECT_EQ(r["filter"]["dropped_missing"], 1);
  EXPECT_EQ(r["filter"]["dropped_category"], 2);
  EXPECT_EQ(r["filter"]["kept"], 14);
  EXPECT_EQ(r["vocab"]["categories"], 2);
  EXPECT_EQ(r["vocab"]["members"], 5);
  EXPECT_EQ(r["split"]["n_train"], 9);
  EXPECT_EQ(r["split"]["n_validation"], 5);
  const auto& hist = r["category_histogram"];
  ASSERT_EQ(hist.size(), 3u);
  EXPECT_EQ(hist[0]["category"], "Fuel");
  EXPECT_EQ(hist[0]["count"], 9);
  EXPECT_EQ(hist[2]["category"], "Postage");
  EXPECT_EQ(hist[2]["kept"], false);
  EXPECT_TRUE(std::filesystem::exists(dir / "dataset.bin"));
}

TEST(Cli, IngestMissingInputNamesPath) {
  const TempDir dir("cli");
  std::string err;
  const int code = test::run_ca_capture(
      "ingest " + fixture_args(dir) + " --set paths.input=" + q(dir / "absent.csv"), err);
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.find("absent.csv"), std::string::npos) << err;
}

TEST(Cli, IngestSchemaFailureExitsTwo) {
  const TempDir dir("cli");
  write_file(dir / "in.csv", "a,b\n1,2\n");
  EXPECT_EQ(run_ca("ingest " + fixture_args(dir) + " --set paths.input=" + q(dir / "in.csv")), 2);
  EXPECT_EQ(run_ca("ingest " + fixture_args(dir) + " --set ingest.min_category_count=1000"), 2);
}

TEST(Cli, PipelineArtifactsAndDeterminism) {
  const TempDir a("cli"), b("cli");
  for (const TempDir* d : {&a, &b}) {
    const std::string args = fixture_args(*d) + " --set paths.investigations=" + q(kData + "/investigations.csv");
    ASSERT_EQ(run_ca("ingest " + args), 0);
    ASSERT_EQ(run_ca("train " + args), 0);
    ASSERT_EQ(run_ca("analyze " + args), 0);
  }
  for (const char* f : {"dataset.bin", "dataset.json", "ingest_report.json", "model.json", "history.jsonl", "plane.svg",
                        "plane.csv", "outliers.json"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  const auto report = read_json(a / "outliers.json");
  EXPECT_EQ(report["categories"].size(), 2u);
  EXPECT_EQ(report["members"].size(), 5u);
  EXPECT_TRUE(report.contains("investigation_correlation"));
  const auto check = test::check_svg(read_file(a / "plane.svg"));
  EXPECT_TRUE(check.well_formed && check.references_resolved());
}

TEST(Cli, AnalyzeAxesAndMissingModel) {
  const TempDir dir("cli");
  EXPECT_EQ(run_ca("analyze " + fixture_args(dir)), 4);
  ASSERT_EQ(run_ca("ingest " + fixture_args(dir)), 0);
  ASSERT_EQ(run_ca("train " + fixture_args(dir) + " --set train.d=3"), 0);
  ASSERT_EQ(run_ca("analyze " + fixture_args(dir) + " --set plane.axes=2,3"), 0);
  const auto report = read_json(dir / "outliers.json");
  EXPECT_EQ(report["axes"][0], 2);
  const auto model = read_json(dir / "model.json");
  const double r2 = model["ratios"][1].get<double>();
  const std::string label = "Factor 2 (" + format_fixed(100.0 * r2, 1) + "%)";
  EXPECT_NE(read_file(dir / "plane.svg").find(label), std::string::npos);
  EXPECT_EQ(run_ca("analyze " + fixture_args(dir) + " --set plane.axes=1,9"), 4);
}

TEST(Cli, TrainFailuresExitThree) {
  const TempDir dir("cli");
  EXPECT_EQ(run_ca("train " + fixture_args(dir)), 3);  // no dataset yet
  ASSERT_EQ(run_ca("ingest " + fixture_args(dir)), 0);
  EXPECT_EQ(run_ca("train " + fixture_args(dir) + " --set train.learning_rate=1e300"), 3);
}

TEST(Cli, ZeroEpochsWritesModelWithEmptyHistory) {
  const TempDir dir("cli");
  ASSERT_EQ(run_ca("ingest " + fixture_args(dir)), 0);
  ASSERT_EQ(run_ca("train " + fixture_args(dir) + " --set train.epochs=0"), 0);
  EXPECT_TRUE(read_json(dir / "model.json")["history"].empty());
  EXPECT_EQ(read_file(dir / "history.jsonl"), "");
}

TEST(Cli, DefaultTrainingConfigIsRecorded) {
  const TempDir dir("cli");
  write_file(dir / "s.ini", "[synth]\nrows = 10\ncols = 10\nn = 300\n");
  const std::string args = "--config " + q(dir / "s.ini") + " --out " + q(dir.path());
  ASSERT_EQ(run_ca("synth " + args), 0);
  ASSERT_EQ(run_ca("train " + args), 0);
  const auto cfg = read_json(dir / "model.json")["config"];
  EXPECT_EQ(cfg["epochs"], 20);
  EXPECT_EQ(cfg["batch_size"], 256);
  EXPECT_EQ(cfg["learning_rate"], 0.01);
  EXPECT_EQ(cfg["f_hidden"], nlohmann::json({1000, 500, 300, 50}));
  EXPECT_EQ(read_json(dir / "model.json")["history"].size(), 20u);
}

TEST(Cli, SynthGroundTruth) {
  const TempDir dir("cli");
  write_file(dir / "s.ini", "[synth]\njoint = 0.25 0.25; 0.25 0.25\nn = 1000\n");
  const std::string args = "--config " + q(dir / "s.ini") + " --out " + q(dir.path());
  ASSERT_EQ(run_ca("synth " + args), 0);
  auto truth = read_json(dir / "ground_truth.json");
  ASSERT_EQ(truth["factor_scores"].size(), 1u);
  EXPECT_LE(truth["factor_scores"][0].get<double>(), 1e-12);

  ASSERT_EQ(run_ca("synth " + args + " --set \"synth.joint=0.5 0; 0 0.5\""), 0);
  truth = read_json(dir / "ground_truth.json");
  EXPECT_NEAR(truth["factor_scores"][0].get<double>(), 1.0, 1e-12);
  const std::string samples = read_file(dir / "samples.csv");
  EXPECT_EQ(samples.substr(0, 4), "x,y\n");
  EXPECT_EQ(std::count(samples.begin(), samples.end(), '\n'), 1001);

  EXPECT_EQ(run_ca("synth " + args + " --set \"synth.joint=0.6 0.6\""), 1);
}

TEST(Cli, SynthSamplingErrorIsSmall) {
  const TempDir dir("cli");
  write_file(dir / "s.ini", "[synth]\nrows = 6\ncols = 5\nn = 50000\n[run]\nseed = 4\n");
  ASSERT_EQ(run_ca("synth --config " + q(dir / "s.ini") + " --out " + q(dir.path())), 0);
  const auto truth = read_json(dir / "ground_truth.json");
  EXPECT_NEAR(truth["empirical"]["factor_scores"][0].get<double>(), truth["factor_scores"][0].get<double>(), 0.03);
}

TEST(Cli, CompareOracle) {
  const TempDir dir("cli");
  write_file(dir / "s.ini",
             "[synth]\njoint = 0.5 0; 0 0.5\nn = 4000\n[train]\nd = 1\nepochs = 5\nf_hidden = 16\ng_hidden = 16\n");
  const std::string args = "--config " + q(dir / "s.ini") + " --out " + q(dir.path());
  ASSERT_EQ(run_ca("synth " + args), 0);
  EXPECT_EQ(run_ca("compare-oracle " + args), 4);  // no model yet
  ASSERT_EQ(run_ca("train " + args), 0);
  ASSERT_EQ(run_ca("compare-oracle " + args), 0);
  const auto report = read_json(dir / "compare.json");
  EXPECT_LE(report["factors"][0]["abs_delta"].get<double>(), 0.05);
}

TEST(Cli, CompareOracleIndependentAndUntrained) {
  const TempDir dir("cli");
  write_file(dir / "s.ini",
             "[synth]\njoint = 0.25 0.25; 0.25 0.25\nn = 4000\n[train]\nd = 1\nepochs = 5\nf_hidden = 16\n"
             "g_hidden = 16\n");
  const std::string args = "--config " + q(dir / "s.ini") + " --out " + q(dir.path());
  ASSERT_EQ(run_ca("synth " + args), 0);
  ASSERT_EQ(run_ca("train " + args), 0);
  ASSERT_EQ(run_ca("compare-oracle " + args), 0);
  auto report = read_json(dir / "compare.json");
  EXPECT_LE(report["factors"][0]["oracle"].get<double>(), 0.05);
  EXPECT_LE(report["factors"][0]["neural"].get<double>(), 0.05);

  ASSERT_EQ(run_ca("train " + args + " --set \"synth.joint=0.4 0.1; 0.1 0.4\" --set train.epochs=0"), 0);
  ASSERT_EQ(run_ca("compare-oracle " + args), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "compare.json"));
}

TEST(Cli, CompareOracleRejectsContinuousData) {
  const TempDir dir("cli");
  ASSERT_EQ(run_ca("ingest " + fixture_args(dir)), 0);
  ASSERT_EQ(run_ca("train " + fixture_args(dir)), 0);
  std::string err;
  EXPECT_EQ(test::run_ca_capture("compare-oracle " + fixture_args(dir), err), 4);
  EXPECT_NE(err.find("continuous"), std::string::npos) << err;
}

TEST(Cli, TrainingCurveMostlyDecreases) {
  const TempDir dir("cli");
  write_file(dir / "s.ini",
             "[synth]\nrows = 6\ncols = 5\nn = 10000\n[train]\nd = 3\nepochs = 10\nf_hidden = 32\ng_hidden = 32\n"
             "[run]\nseed = 2\n");
  const std::string args = "--config " + q(dir / "s.ini") + " --out " + q(dir.path());
  ASSERT_EQ(run_ca("synth " + args), 0);
  ASSERT_EQ(run_ca("train " + args), 0);
  std::istringstream lines(read_file(dir / "history.jsonl"));
  std::vector<double> losses;
  for (std::string line; std::getline(lines, line);) losses.push_back(nlohmann::json::parse(line)["train_loss"]);
  ASSERT_EQ(losses.size(), 10u);
  int ok = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) ok += losses[i] <= losses[i - 1];
  EXPECT_GE(ok, 8);  // at least 80% of the 9 consecutive pairs
}
