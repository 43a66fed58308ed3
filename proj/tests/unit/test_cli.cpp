// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "pnf/cli.hpp"
#include "pnf/dataset_io.hpp"
#include "support.hpp"

namespace pnf::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Relative path -> contents for every regular file under `root`.
std::map<std::string, std::string> snapshot(const fs::path& root, bool skip_manifest = false) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).string();
    if (skip_manifest && e.path().filename() == kManifestFile) continue;
    out[rel] = slurp(e.path());
  }
  return out;
}

int run(std::vector<std::string> args) {
  args.push_back("-q");
  return run_command(args);
}

// The loader resamples every image to 256 pixels, so the pipeline runs the
// toy preset at full resolution on a handful of subjects.
void write_small_config(const fs::path& path) {
  std::ofstream(path) << json{{"train",
                               {{"backbone", "toy"}, {"epochs", 2}, {"learning_rate", 1e-3}, {"max_translate_px", 8}}}}
                             .dump(2);
}

TEST(Cli, SynthWritesDatasetAndManifest) {
  test::TempDir dir;
  ASSERT_EQ(run({"synth", "--subjects", "50", "--seed", "7", "--out", (dir / "ds").string()}), kExitOk);
  const Dataset ds = load_dataset(dir / "ds");
  EXPECT_EQ(ds.subjects.size(), 50u);
  const json m = read_json(dir / "ds" / kManifestFile);
  EXPECT_EQ(m["command"], "synth");
  EXPECT_EQ(m["status"], "complete");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["tool_version"], kToolVersion);
  for (const char* k : {"config", "inputs", "outputs", "started_at", "finished_at", "wall_seconds"})
    EXPECT_TRUE(m.contains(k)) << k;
  bool has_manifest_csv = false;
  for (const auto& o : m["outputs"]) has_manifest_csv = has_manifest_csv || o == "manifest.csv";
  EXPECT_TRUE(has_manifest_csv);
}

TEST(Cli, UsageErrorsExitTwo) {
  test::TempDir dir;
  EXPECT_EQ(run({"synth", "--bogus-flag", "1"}), kExitUsage);
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"train", "--out", (dir / "t").string()}), kExitUsage);  // no dataset
  EXPECT_EQ(run({"synth", "--subjects", "0", "--out", (dir / "z").string()}), kExitUsage);
  EXPECT_EQ(run({"calibrate", "--predictions", (dir / "none.csv").string(), "--out", (dir / "c").string()}),
            kExitUsage);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new test::TempDir("pnf_cli");
    const fs::path r = root_->path();
    write_small_config(r / "cfg.json");
    const std::string cfg = (r / "cfg.json").string();
    ASSERT_EQ(run({"synth", "--texture-contrast", "3", "--subjects", "16", "--cores-per-subject", "3", "--seed", "3", "--out",
                   (r / "ds").string()}),
              kExitOk);
    ASSERT_EQ(run({"crossval", "--config", cfg, "--dataset", (r / "ds").string(), "--folds", "2", "--out",
                   (r / "cv").string()}),
              kExitOk);
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
  }
  static fs::path path(const std::string& s) { return root_->path() / s; }
  static test::TempDir* root_;
};
test::TempDir* Pipeline::root_ = nullptr;

TEST_F(Pipeline, CrossvalArtifacts) {
  EXPECT_TRUE(fs::exists(path("cv/fold0/checkpoint.pnf")));
  EXPECT_TRUE(fs::exists(path("cv/fold1/checkpoint.pnf")));
  EXPECT_TRUE(fs::exists(path("cv/predictions.csv")));
  const json s = read_json(path("cv/cv_summary.json"));
  EXPECT_EQ(s["folds"], 2);
  EXPECT_EQ(s["fold_of"].size(), 16u);
  EXPECT_EQ(read_json(path("cv") / kManifestFile)["status"], "complete");
}

TEST_F(Pipeline, CalibrateEvalAndMissingBins) {
  const std::string ckpt = path("cv/fold0/checkpoint.pnf").string();
  EXPECT_EQ(run({"eval", "--checkpoint", ckpt, "--dataset", path("ds").string(), "--out", path("ev0").string()}),
            kExitUsage);
  ASSERT_EQ(run({"calibrate", "--predictions", path("cv/predictions.csv").string(), "--reference",
                 "30,25,20,15,10", "--dataset", path("ds").string(), "--out", path("cal").string()}),
            kExitOk);
  const json bins = read_json(path("cal/bins.json"));
  EXPECT_TRUE(bins.contains("operating_threshold"));
  EXPECT_EQ(run({"calibrate", "--predictions", path("cv/predictions.csv").string(), "--reference", "1,2,3",
                 "--out", path("cal_bad").string()}),
            kExitUsage);
  ASSERT_EQ(run({"eval", "--checkpoint", ckpt, "--dataset", path("ds").string(), "--bins",
                 path("cal/bins.json").string(), "--out", path("ev").string()}),
            kExitOk);
  const json rep = read_json(path("ev/eval_report.json"));
  EXPECT_EQ(rep["n_cores"], 48);
  EXPECT_EQ(rep["tasks"].size(), 2u);
  EXPECT_TRUE(fs::exists(path("ev/figures/checkerboard.png")));
  EXPECT_TRUE(fs::exists(path("ev/predictions.csv")));
}

TEST_F(Pipeline, ReplayReproducesArtifacts) {
  ASSERT_EQ(run({"replay", "--manifest", (path("cv") / kManifestFile).string(), "--out", path("cv_replay").string()}),
            kExitOk);
  const auto a = snapshot(path("cv"), true);
  const auto b = snapshot(path("cv_replay"), true);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [rel, bytes] : a) {
    ASSERT_TRUE(b.count(rel)) << rel;
    EXPECT_TRUE(b.at(rel) == bytes) << rel << " differs";
  }
  const json m = read_json(path("cv_replay") / kManifestFile);
  json expected = read_json(path("cv") / kManifestFile)["config"];
  expected["out"] = path("cv_replay").string();
  EXPECT_EQ(m["config"], expected);
}

TEST_F(Pipeline, InputsAreNotModified) {
  const auto before = snapshot(path("ds"));
  test::TempDir out;
  ASSERT_EQ(run({"train", "--config", path("cfg.json").string(), "--dataset", path("ds").string(), "--epochs", "1",
                 "--out", (out / "t").string()}),
            kExitOk);
  EXPECT_TRUE(fs::exists(out / "t/all/checkpoint.pnf"));
  EXPECT_EQ(snapshot(path("ds")), before);
  EXPECT_EQ(run({"train", "--config", path("cfg.json").string(), "--dataset", path("ds").string(), "--out",
                 path("ds").string()}),
            kExitUsage);
  EXPECT_EQ(snapshot(path("ds")), before);
}

TEST_F(Pipeline, AblateWritesTable) {
  ASSERT_EQ(run({"ablate", "--config", path("cfg.json").string(), "--dataset", path("ds").string(), "--folds", "2",
                 "--epochs", "1", "--marker-sets", "none;age,psa", "--head-modes", "both,class_only", "--out",
                 path("ab").string()}),
            kExitOk);
  const std::string csv = slurp(path("ab/ablation.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(read_json(path("ab/ablation.json")).size(), 4u);
}

}  // namespace
}  // namespace pnf::cli
