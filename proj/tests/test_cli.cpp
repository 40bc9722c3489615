#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = LATSEP_CLI;

struct Result {
  int code;
};

Result run(const std::string& args) {
  std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status)};
}

fs::path work_dir() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() / "latsep_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

// small dataset shared by the training-dependent tests
fs::path dataset() {
  static fs::path dir = [] {
    auto d = work_dir() / "data";
    EXPECT_EQ(run("make-data --n 150 --resolution 32 --correlation 1.0 --seed 1 --out " +
                  d.string()).code,
              0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST(CliErrors, ExitCodeContract) {
  EXPECT_EQ(run("toy --config /nonexistent.json").code, 2);
  EXPECT_EQ(run("toy --no-such-flag").code, 2);
  EXPECT_EQ(run("make-data --resolution 33 --out " + (work_dir() / "bad").string()).code, 2);
  EXPECT_EQ(run("--help").code, 0);
  // unknown config keys are rejected
  auto cfg = work_dir() / "bad_key.json";
  std::ofstream(cfg) << R"({"bogus": 1})";
  EXPECT_EQ(run("toy --config " + cfg.string()).code, 2);
}

TEST(CliErrors, NumericAbortExits3) {
  auto out = work_dir() / "boom";
  EXPECT_EQ(run("train-encoder --data " + dataset().string() +
                " --epochs 1 --batch 32 --lr 1e18 --out " + out.string())
                .code,
            3);
}

TEST(CliToy, ConfigFileDrivesRunAndCliWins) {
  auto cfg = work_dir() / "toy.json";
  std::ofstream(cfg) << R"({"pattern": "linear", "measure": "gmi", "n": 200, "steps": 10})";
  auto out = work_dir() / "toy_cfg";
  ASSERT_EQ(run("toy --config " + cfg.string() + " --steps 5 --out " + out.string()).code, 0);
  auto report = load(out / "trajectory.json");
  EXPECT_EQ(report.at("config").at("pattern"), "linear");
  EXPECT_EQ(report.at("config").at("steps").get<int>(), 5);  // flag beats file
  EXPECT_EQ(report.at("trajectory").size(), 6u);
  EXPECT_FALSE(report.at("config_hash").get<std::string>().empty());
  EXPECT_FALSE(report.at("code_fingerprint").get<std::string>().empty());
}

TEST(CliToy, GmiOnLinearReducesDcor) {
  auto out = work_dir() / "toy_gmi";
  ASSERT_EQ(run("toy --pattern linear --measure gmi --out " + out.string()).code, 0);
  auto traj = load(out / "trajectory.json").at("trajectory");
  EXPECT_LT(traj.back().at("dcor").get<double>(), traj.front().at("dcor").get<double>());
  EXPECT_TRUE(fs::exists(out / "pairs_before.png"));
  EXPECT_TRUE(fs::exists(out / "pairs_after.png"));
}

TEST(CliToy, SineDcorReachesTarget) {
  auto out = work_dir() / "toy_sine";
  ASSERT_EQ(run("toy --pattern nonlinear_sine --measure dcor --out " + out.string()).code, 0);
  EXPECT_LT(load(out / "trajectory.json").at("final_dcor").get<double>(), 0.1);
}

TEST(CliMakeData, SplitsConfoundAndDeterminism) {
  auto dir = dataset();
  for (const char* split : {"train", "val", "test"})
    ASSERT_TRUE(fs::exists(dir / split / "manifest.jsonl")) << split;
  int64_t lines = 0;
  std::string line;
  for (const char* split : {"train", "val", "test"}) {
    std::ifstream manifest(dir / split / "manifest.jsonl");
    while (std::getline(manifest, line)) {
      auto j = json::parse(line);
      ++lines;
      // correlation 1.0: camera class deterministically implied
      EXPECT_EQ(j.at("camera_class").get<int>(), j.at("attribute_class").get<int>() % 5);
    }
  }
  EXPECT_EQ(lines, 150);
  // a second output directory without --force is refused
  EXPECT_EQ(run("make-data --n 150 --resolution 32 --seed 1 --out " + dir.string()).code, 2);
  // byte-identical manifests under the same seed
  auto dir2 = work_dir() / "data_rerun";
  ASSERT_EQ(run("make-data --n 150 --resolution 32 --correlation 1.0 --seed 1 --out " +
                dir2.string()).code,
            0);
  for (const char* split : {"train", "val", "test"})
    EXPECT_EQ(slurp(dir / split / "manifest.jsonl"), slurp(dir2 / split / "manifest.jsonl"));
}

TEST(CliTrainEncoder, ResumeContinuesEpochCounter) {
  auto out1 = work_dir() / "enc1";
  auto out2 = work_dir() / "enc2";
  ASSERT_EQ(run("train-encoder --data " + dataset().string() +
                " --epochs 2 --batch 32 --out " + out1.string()).code,
            0);
  ASSERT_EQ(run("train-encoder --data " + dataset().string() +
                " --epochs 1 --batch 32 --resume " + (out1 / "encoder.pt").string() +
                " --out " + out2.string()).code,
            0);
  auto log = load(out2 / "train_log.json").at("log");
  ASSERT_EQ(log.size(), 3u);
  for (size_t i = 0; i < log.size(); ++i)
    EXPECT_EQ(log[i].at("epoch").get<int>(), static_cast<int>(i));
}

TEST(CliEval, ReportStructure) {
  auto enc = work_dir() / "enc1";  // produced by the resume test
  if (!fs::exists(enc / "encoder.pt"))
    ASSERT_EQ(run("train-encoder --data " + dataset().string() +
                  " --epochs 2 --batch 32 --out " + enc.string()).code,
              0);
  auto out = work_dir() / "eval";
  ASSERT_EQ(run("eval --checkpoint " + (enc / "encoder.pt").string() + " --data " +
                dataset().string() + " --out " + out.string()).code,
            0);
  auto report = load(out / "report.json");
  // one row per subspace, one column per labeled factor
  EXPECT_EQ(report.at("confusion").size(), 2u);
  EXPECT_EQ(report.at("confusion")[0].size(), 2u);
  EXPECT_EQ(report.at("pairwise_dcor").size(), 2u);
  EXPECT_EQ(report.at("subspace_names"), (json{"attribute", "camera"}));
  EXPECT_TRUE(report.contains("schema_version"));
  EXPECT_TRUE(fs::exists(out / "confusion.png"));
  EXPECT_TRUE(fs::exists(out / "pairwise_dcor.png"));
  // corrupt checkpoint is an input error, not a crash
  auto junk = work_dir() / "junk.pt";
  std::ofstream(junk) << "not a checkpoint";
  EXPECT_EQ(run("eval --checkpoint " + junk.string() + " --data " + dataset().string() +
                " --out " + (work_dir() / "evaljunk").string()).code,
            2);
}

TEST(CliSwap, GridManifestAndEval) {
  auto gan = work_dir() / "gan";
  ASSERT_EQ(run("train-gan --data " + dataset().string() +
                " --epochs 1 --batch 16 --out " + gan.string()).code,
            0);
  auto grid = work_dir() / "grid";
  ASSERT_EQ(run("swap-grid --checkpoint " + (gan / "gan.pt").string() + " --data " +
                dataset().string() + " --ids 0 1 2 --subspace identity --out " +
                grid.string()).code,
            0);
  EXPECT_TRUE(fs::exists(grid / "grid.png"));
  auto manifest = load(grid / "manifest.json");
  ASSERT_EQ(manifest.at("cells").size(), 9u);
  for (const auto& cell : manifest.at("cells")) {
    EXPECT_TRUE(cell.contains("target"));
    EXPECT_TRUE(cell.contains("donor"));
    EXPECT_EQ(cell.at("subspace"), "identity");
    if (cell.at("row") == cell.at("col"))
      EXPECT_EQ(cell.at("target"), cell.at("donor"));  // diagonal = self-reconstruction
  }
  auto se = work_dir() / "swapeval";
  ASSERT_EQ(run("swap-eval --checkpoint " + (gan / "gan.pt").string() + " --data " +
                dataset().string() + " --epochs 2 --out " + se.string()).code,
            0);
  auto report = load(se / "swap_eval.json");
  for (const char* key : {"standard", "swapped_new_labels", "swapped_original_labels"})
    EXPECT_TRUE(report.at(key).is_number()) << key;
}
