#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "xmrca/cli/commands.hpp"
#include "xmrca/core/error.hpp"
#include "xmrca/eval/metrics.hpp"
#include "xmrca/gat/model.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const char* root = std::getenv("XMRCA_TMP");
  const fs::path dir = fs::path(root != nullptr ? root : fs::temp_directory_path() / "xmrca_cli") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Writes the business snapshot with a constant history under `dir`.
fs::path write_snapshot(const fs::path& dir) {
  auto manifest = testing::snapshot_manifest();
  manifest.data = "snapshot.csv";
  std::ofstream(dir / "snapshot.csv") << testing::snapshot_history_csv(10);
  manifest.write(dir / "manifest.txt");
  return dir / "manifest.txt";
}

Run simulate(const fs::path& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"simulate", "--out", dir.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

TEST(Cli, SimulateWritesReloadableFiles) {
  const auto dir = scratch("simulate");
  const auto r = simulate(dir);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* name : {"leaves.csv", "labels.csv", "manifest.txt"}) EXPECT_TRUE(fs::exists(dir / name)) << name;
  RunConfig config;
  config.manifest = dir / "manifest.txt";
  const auto data = load_dataset(config);
  EXPECT_EQ(data.dataset.tree.num_leaves(), 8u);
  EXPECT_EQ(data.full.num_timestamps(), 200u);
  EXPECT_EQ(data.dataset.metrics.name(data.monitored), "d");
}

TEST(Cli, SimulateIsByteIdenticalForASeed) {
  const auto a = scratch("seed_a");
  const auto b = scratch("seed_b");
  ASSERT_EQ(simulate(a, {"--seed", "7"}).code, kExitOk);
  ASSERT_EQ(simulate(b, {"--seed", "7"}).code, kExitOk);
  for (const char* name : {"leaves.csv", "labels.csv", "manifest.txt"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  const auto c = scratch("seed_c");
  ASSERT_EQ(simulate(c, {"--seed", "8"}).code, kExitOk);
  EXPECT_NE(slurp(a / "leaves.csv"), slurp(c / "leaves.csv"));
}

TEST(Cli, LogOuterFunctionStaysInDomain) {
  const auto dir = scratch("f2");
  ASSERT_EQ(simulate(dir, {"--f-index", "2", "--seed", "3"}).code, kExitOk);
  RunConfig config;
  config.manifest = dir / "manifest.txt";
  const auto data = load_dataset(config);
  EXPECT_NE(data.manifest.derived[1].formula.find("log"), std::string::npos);
  for (std::size_t t = 0; t < data.full.num_timestamps(); ++t) {
    for (NodeId id = 0; id < data.dataset.tree.size(); ++id) {
      for (std::size_t m = 0; m < data.dataset.metrics.size(); ++m) {
        EXPECT_TRUE(std::isfinite(data.full.value(t, id, m)));
      }
    }
  }
}

TEST(Cli, TrainOneEpochWritesOneLogRow) {
  const auto dir = scratch("train1");
  ASSERT_EQ(simulate(dir).code, kExitOk);
  const auto r = run({"train", "--manifest", (dir / "manifest.txt").string(), "--out", dir.string(), "--epochs", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto log = lines(slurp(dir / "training_log.csv"));
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0], "epoch,train_mse,validation_mse");
  const auto text = slurp(dir / "model.txt");
  const auto model = deserialize_model(text);
  EXPECT_EQ(serialize_model(model), text);
}

TEST(Cli, TrainingIsDeterministic) {
  const auto a = scratch("train_a");
  const auto b = scratch("train_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(simulate(dir).code, kExitOk);
    ASSERT_EQ(run({"train", "--manifest", (dir / "manifest.txt").string(), "--out", dir.string(), "--epochs", "5",
                   "--seed", "4"})
                  .code,
              kExitOk);
  }
  EXPECT_EQ(slurp(a / "training_log.csv"), slurp(b / "training_log.csv"));
  EXPECT_EQ(slurp(a / "model.txt"), slurp(b / "model.txt"));
}

TEST(Cli, DivergenceHasItsOwnExitCode) {
  const auto dir = scratch("diverge");
  ASSERT_EQ(simulate(dir).code, kExitOk);
  const auto r = run({"train", "--manifest", (dir / "manifest.txt").string(), "--out", dir.string(), "--set",
                      "gat.learning_rate=1e300", "--epochs", "20"});
  EXPECT_EQ(r.code, kExitDivergence) << r.err;
}

TEST(Cli, SnapshotSummaryNamesSearchUs) {
  const auto dir = scratch("snapshot");
  const auto manifest = write_snapshot(dir);
  const auto r = run({"localize", "--manifest", manifest.string(), "--out", dir.string(), "--relationship", "exact"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto summary = lines(slurp(dir / "summary.txt"));
  ASSERT_FALSE(summary.empty());
  EXPECT_EQ(summary[0].rfind("root cause: Search|US", 0), 0u) << summary[0];
  EXPECT_EQ(lines(slurp(dir / "report.txt")).front().rfind("node=Search|US", 0), 0u);
}

TEST(Cli, QuietTimestampExitsWithNoAnomaly) {
  const auto dir = scratch("quiet");
  const auto manifest = write_snapshot(dir);
  const auto r = run({"localize", "--manifest", manifest.string(), "--out", dir.string(), "--relationship", "exact",
                      "--timestamp", "5"});
  EXPECT_EQ(r.code, kExitNoAnomaly) << r.err;
  EXPECT_FALSE(fs::exists(dir / "summary.txt"));
}

TEST(Cli, HighFilterThresholdExitsWithNoCandidates) {
  const auto dir = scratch("strict");
  const auto manifest = write_snapshot(dir);
  const auto r = run({"localize", "--manifest", manifest.string(), "--out", dir.string(), "--relationship", "exact",
                      "--set", "filter.mode=literal", "--t-delta", "0.99"});
  EXPECT_EQ(r.code, kExitNoCandidates) << r.err;
}

TEST(Cli, InputErrorsExitWithTwo) {
  const auto dir = scratch("bad");
  EXPECT_EQ(run({"localize", "--manifest", (dir / "missing.txt").string()}).code, kExitInput);
  EXPECT_EQ(run({"train", "--set", "no.such.key=1"}).code, kExitInput);
  EXPECT_EQ(run({"frobnicate"}).code, kExitInput);
  EXPECT_EQ(run({"simulate", "--out", dir.string(), "--f-index", "9"}).code, kExitInput);
}

TEST(Cli, DetectWritesOneRowPerTimestampAfterTheFirst) {
  const auto dir = scratch("detect");
  ASSERT_EQ(simulate(dir, {"--seed", "2"}).code, kExitOk);
  ASSERT_EQ(run({"detect", "--manifest", (dir / "manifest.txt").string(), "--out", dir.string()}).code, kExitOk);
  const auto rows = lines(slurp(dir / "detections.csv"));
  ASSERT_EQ(rows.size(), 200u);
  EXPECT_EQ(rows[0], "timestamp,observed,expected,sigma,anomalous");
}

TEST(Cli, EvaluateWritesDetailAndAggregateRows) {
  const auto dir = scratch("evaluate");
  ASSERT_EQ(simulate(dir, {"--seed", "5"}).code, kExitOk);
  const auto r = run({"evaluate", "--manifest", (dir / "manifest.txt").string(), "--out", dir.string(),
                      "--relationship", "exact"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = lines(slurp(dir / "evaluation.csv"));
  ASSERT_EQ(rows.size(), 1u + 2u * 20u + 2u);
  std::size_t cmmd = 0, adt = 0;
  EvalCounts sum;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto fields = split_csv_line(rows[i]);
    ASSERT_EQ(fields.size(), 9u);
    if (fields[0] == "ALL") {
      if (fields[1] != "cmmd") continue;
      EXPECT_EQ(std::stoul(fields[2]), sum.tp);
      EXPECT_EQ(std::stoul(fields[3]), sum.fp);
      EXPECT_EQ(std::stoul(fields[4]), sum.fn);
      EXPECT_NEAR(std::stod(fields[7]), sum.f1(), 1e-12);
      continue;
    }
    if (fields[1] == "cmmd") {
      ++cmmd;
      sum += EvalCounts{std::stoul(fields[2]), std::stoul(fields[3]), std::stoul(fields[4])};
    } else {
      ++adt;
    }
  }
  EXPECT_EQ(cmmd, 20u);
  EXPECT_EQ(adt, 20u);
  EXPECT_EQ(rows[rows.size() - 2].rfind("ALL,cmmd,", 0), 0u);
  EXPECT_EQ(rows.back().rfind("ALL,adtributor,", 0), 0u);
}

TEST(Cli, EvaluateWithoutLabelsIsAnInputError) {
  const auto dir = scratch("nolabels");
  ASSERT_EQ(simulate(dir).code, kExitOk);
  fs::remove(dir / "labels.csv");
  const auto r = run({"evaluate", "--manifest", (dir / "manifest.txt").string(), "--out", dir.string(),
                      "--relationship", "exact"});
  EXPECT_EQ(r.code, kExitInput) << r.err;
}

TEST(Cli, ConfigFileAndOverridesCompose) {
  const auto dir = scratch("config");
  std::ofstream(dir / "run.cfg") << "# synthetic run\nsynth.timestamps=40\nsynth.anomalies=3\nseed=1\n";
  ASSERT_EQ(run({"simulate", "--config", (dir / "run.cfg").string(), "--out", dir.string(), "--set",
                 "synth.anomalies=2"})
                .code,
            kExitOk);
  EXPECT_EQ(lines(slurp(dir / "leaves.csv")).size(), 1u + 40u * 8u);
  EXPECT_EQ(lines(slurp(dir / "labels.csv")).size() > 1u, true);
  RunConfig config;
  EXPECT_THROW(config.apply("gat.epochs", "-1"), Error);
  EXPECT_THROW(config.apply_assignment("novalue"), Error);
}

}  // namespace
}  // namespace xmrca
