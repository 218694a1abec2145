// Copyright 2026 The LKD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lkd/error.hpp"
#include "lkd_tools/cli.hpp"
#include "lkd_tools/run_config.hpp"

namespace lkd::tools {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lkd_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& json) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << json;
  return p;
}

class SeedEnv : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("LKD_SEED"); }
  void TearDown() override { unsetenv("LKD_SEED"); }
};

TEST(Help, DocumentsEveryFlagAndDefault) {
  const std::string text = help_text();
  for (const char* s : {"synth", "train", "eval", "count", "footprint", "erf", "gradcheck", "--threads", "--seed",
                        "--config", "--out", "--data", "--eval-data", "--ckpt", "--variant", "--ablation", "--hw",
                        "--eq3", "--compare", "--d", "--C", "--K", "--mask", "--tap", "--op", "--list", "[256]",
                        "[21]", "[3]", "[24]", "[0]"}) {
    EXPECT_NE(text.find(s), std::string::npos) << s;
  }
}

TEST(Help, FlagExitsZero) {
  const CliRun r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("gradcheck"), std::string::npos);
  const CliRun sub = run({"count", "--help"});
  EXPECT_EQ(sub.code, kExitOk);
  EXPECT_NE(sub.out.find("--variant"), std::string::npos);
}

TEST(ExitCodes, UsageErrors) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"count", "--bogus"}, {"synth"}, {"frobnicate"}, {"count", "--eq3", "1", "2"}}) {
    const CliRun r = run(args);
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "usage");
  }
}

TEST(ExitCodes, ValidationErrors) {
  const CliRun r = run({"count", "--variant", "xl"});
  EXPECT_EQ(r.code, kExitValidation);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("error"), "validation");
  EXPECT_NE(j.at("message").get<std::string>().find("xl"), std::string::npos);
  EXPECT_EQ(run({"train", "--data", "/nonexistent/lkd", "--out", "/tmp/x"}).code, kExitValidation);
  EXPECT_EQ(run({"gradcheck", "--op", "no_such_op"}).code, kExitValidation);
  EXPECT_EQ(run({"footprint", "--K", "20"}).code, kExitValidation);
}

TEST(Count, VariantTotalsRow) {
  const CliRun r = run({"count", "--variant", "t", "--hw", "256"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string last = r.out.substr(r.out.rfind("total,"));
  std::stringstream ss(last);
  std::string name, kind, params, macs;
  std::getline(ss, name, ',');
  std::getline(ss, kind, ',');
  std::getline(ss, params, ',');
  std::getline(ss, macs, ',');
  EXPECT_NEAR(std::stod(params) / 0.343e6, 1, 0.05);
  EXPECT_NEAR(std::stod(macs) / 3.41e9, 1, 0.10);
}

TEST(Count, FormulaAndComparison) {
  const CliRun r = run({"count", "--eq3", "13", "3", "1"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("= 50\n"), std::string::npos) << r.out;
  const CliRun c = run({"count", "--compare", "7", "13", "21", "--d", "3", "--C", "24"});
  ASSERT_EQ(c.code, kExitOk);
  EXPECT_NE(c.out.find("21,3,24,10584,1776"), std::string::npos) << c.out;
  EXPECT_EQ(run({"count", "--ablation", "base"}).code, kExitOk);
}

TEST(Footprint, ReportLine) {
  const CliRun r = run({"footprint", "--K", "13", "--d", "3"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, "legs 5×5 + 5×5(d=3), extent 17, holes 0, covers 13: yes\n");
  const CliRun m = run({"footprint", "--K", "5", "--d", "1", "--mask"});
  EXPECT_EQ(m.out, "legs 1×1 + 5×5(d=1), extent 5, holes 0, covers 5: yes\n#####\n#####\n#####\n#####\n#####\n");
}

TEST(GradCheck, SingleOpAndList) {
  const CliRun r = run({"gradcheck", "--op", "pixel_shuffle"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("pixel_shuffle,5,"), std::string::npos) << r.out;
  const CliRun l = run({"gradcheck", "--list"});
  EXPECT_NE(l.out.find("model_tiny\n"), std::string::npos);
}

TEST(RunConfig, RejectsUnknownKeysInEverySection) {
  for (const char* bad : {R"({"modle": {}})", R"({"model": {"dimz": 1}})", R"({"train": {"lr": 1}})",
                          R"({"data": {"count": 2}})", R"({"erf": {"tapp": "output"}})"}) {
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(bad)), ValidationError) << bad;
  }
}

TEST(RunConfig, DefaultsAndJsonRoundTrip) {
  const RunConfig d = run_config_from_json(nlohmann::json::object());
  EXPECT_EQ(d.model, LkdConfig{});
  EXPECT_EQ(d.data.n, 200);
  EXPECT_EQ(d.train.batch, 4);
  EXPECT_EQ(d.train.patch, 64);
  RunConfig c = d;
  c.model = variant_config("desk");
  c.train.steps = 17;
  c.data.beta_max = 1.5;
  c.erf.tap = Tap::bottleneck;
  c.apply_seed(9);
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.train.steps, 17);
  EXPECT_EQ(back.data.beta_max, 1.5);
  EXPECT_EQ(back.erf.tap, Tap::bottleneck);
  EXPECT_EQ(back.train.seed, 9u);
  EXPECT_EQ(back.data.seed, 9u);
}

TEST_F(SeedEnv, FlagBeatsEnvironmentBeatsConfig) {
  EXPECT_FALSE(seed_override(std::nullopt).has_value());
  setenv("LKD_SEED", "42", 1);
  EXPECT_EQ(seed_override(std::nullopt), 42u);
  EXPECT_EQ(seed_override(7u), 7u);
  setenv("LKD_SEED", "forty", 1);
  EXPECT_THROW(seed_override(std::nullopt), ValidationError);
}

TEST_F(SeedEnv, SynthIsDeterministicAndSeedSensitive) {
  const fs::path dir = temp_dir("synth");
  const fs::path cfg = write_config(dir, R"({"seed": 3, "data": {"n": 2, "size": 16}})");
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "a").string()}).code, kExitOk);
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "b").string()}).code, kExitOk);
  EXPECT_EQ(slurp(dir / "a" / "hazy_00001.ppm"), slurp(dir / "b" / "hazy_00001.ppm"));
  EXPECT_EQ(slurp(dir / "a" / "manifest.txt"), slurp(dir / "b" / "manifest.txt"));
  setenv("LKD_SEED", "4", 1);
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "c").string()}).code, kExitOk);
  EXPECT_NE(slurp(dir / "a" / "clean_00000.ppm"), slurp(dir / "c" / "clean_00000.ppm"));
  ASSERT_EQ(run({"--seed", "3", "synth", "--config", cfg.string(), "--out", (dir / "d").string()}).code, kExitOk);
  EXPECT_EQ(slurp(dir / "a" / "clean_00000.ppm"), slurp(dir / "d" / "clean_00000.ppm"));
  fs::remove_all(dir);
}

TEST_F(SeedEnv, TrainEvalErfPipeline) {
  const fs::path dir = temp_dir("pipeline");
  const fs::path cfg = write_config(dir, R"({
    "seed": 1,
    "model": {"variant": "desk", "kernel": 9},
    "train": {"steps": 4, "batch": 2, "patch": 16, "eval_every": 2},
    "data": {"n": 3, "size": 16},
    "erf": {"samples": 2, "size": 16}
  })");
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "data").string()}).code, kExitOk);
  const CliRun t1 = run({"--threads", "1", "train", "--config", cfg.string(), "--data", (dir / "data").string(), "--out",
                      (dir / "run1").string()});
  ASSERT_EQ(t1.code, kExitOk) << t1.err;
  const CliRun t2 = run({"--threads", "1", "train", "--config", cfg.string(), "--data", (dir / "data").string(), "--out",
                      (dir / "run2").string()});
  ASSERT_EQ(t2.code, kExitOk) << t2.err;
  EXPECT_EQ(slurp(dir / "run1" / "metrics.csv"), slurp(dir / "run2" / "metrics.csv"));
  EXPECT_EQ(slurp(dir / "run1" / "model.ckpt"), slurp(dir / "run2" / "model.ckpt"));
  EXPECT_EQ(slurp(dir / "run1" / "metrics.csv").substr(0, 23), "step,lr,loss,psnr,ssim\n");

  const std::string ckpt = (dir / "run1" / "model.ckpt").string();
  const CliRun e = run({"eval", "--ckpt", ckpt, "--data", (dir / "data").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(e.out.substr(0, e.out.find('\n')), "image,psnr,ssim,hazy_psnr");
  EXPECT_NE(e.out.find("\nmean,"), std::string::npos);
  EXPECT_NE(e.out.find("\n2,"), std::string::npos);

  const CliRun r = run({"erf", "--ckpt", ckpt, "--config", cfg.string(), "--tap", "bottleneck", "--out",
                     (dir / "erf").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("tap bottleneck"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "erf.lkdt"));
  EXPECT_TRUE(fs::exists(dir / "erf.ppm"));
  EXPECT_TRUE(fs::exists(dir / "erf_r.txt"));
  EXPECT_EQ(run({"erf", "--ckpt", ckpt, "--tap", "middle", "--out", (dir / "x").string()}).code, kExitValidation);
  fs::remove_all(dir);
}

TEST_F(SeedEnv, DivergentTrainingExitsWithNumericCode) {
  const fs::path dir = temp_dir("diverge");
  const fs::path cfg = write_config(dir, R"({
    "model": {"variant": "desk", "kernel": 9},
    "train": {"steps": 6, "batch": 1, "patch": 16, "lr0": 1e30, "eval_every": 0},
    "data": {"n": 1, "size": 16}
  })");
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "data").string()}).code, kExitOk);
  const CliRun r = run({"train", "--config", cfg.string(), "--data", (dir / "data").string(), "--out",
                     (dir / "run").string()});
  EXPECT_EQ(r.code, kExitNumeric) << r.out;
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "numeric");
  EXPECT_TRUE(fs::exists(dir / "run" / "model.ckpt"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace lkd::tools
