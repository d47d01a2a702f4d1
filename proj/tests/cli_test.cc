// Copyright 2026 The jsdseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the jsdseg executable end to end on a tiny model.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "jsdseg/image.h"

namespace {

namespace fs = std::filesystem;

const std::string kTiny =
    " --set model.feature_maps=16 --set model.latent_channels=32 --set model.encoder_width=8"
    " --set train.batch_size=2 --set data.eval_images=2 --set train.log_every=1";

struct Result {
  int code;
  std::string out;
};

Result Cli(const std::string& args) {
  const std::string cmd = std::string(JSDSEG_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("jsdseg_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    const Result r = Cli("train" + kTiny + " --set train.max_steps=6 --set train.checkpoint_every=3 -o " +
                         (dir_ / "m.ckpt").string());
    ASSERT_EQ(r.code, 0) << r.out;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static fs::path dir_;
};
fs::path CliTest::dir_;

TEST_F(CliTest, TrainWritesLogAndCheckpoints) {
  EXPECT_TRUE(fs::exists(dir_ / "m.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "m.step3.ckpt"));
  const std::string log = Slurp(dir_ / "m.ckpt.log");
  EXPECT_NE(log.find("step=0 J="), std::string::npos);
  EXPECT_NE(log.find("step=5 J="), std::string::npos);
  EXPECT_NE(log.find("eval miou="), std::string::npos);
}

TEST_F(CliTest, GenDataEncodeTwiceSegmentAndFuse) {
  const fs::path data = dir_ / "data";
  ASSERT_EQ(Cli("gen-data --count 2 -o " + data.string()).code, 0);
  const std::string img = (data / "image_000001.png").string();
  ASSERT_TRUE(fs::exists(img));
  EXPECT_TRUE(fs::exists(data / "mask_000001.png"));

  const std::string model = (dir_ / "m.ckpt").string();
  ASSERT_EQ(Cli("encode " + img + " -m " + model + " -o " + (dir_ / "a.jsdc").string()).code, 0);
  ASSERT_EQ(Cli("encode " + img + " -m " + model + " -o " + (dir_ / "b.jsdc").string()).code, 0);
  EXPECT_EQ(Slurp(dir_ / "a.jsdc"), Slurp(dir_ / "b.jsdc"));

  // Container path and whole-pipeline path give the same mask.
  ASSERT_EQ(Cli("segment " + (dir_ / "a.jsdc").string() + " -m " + model + " -o " + (dir_ / "c.png").string()).code, 0);
  ASSERT_EQ(Cli("segment " + img + " -m " + model + " -o " + (dir_ / "i.png").string()).code, 0);
  EXPECT_TRUE(jsd::ReadMaskPng((dir_ / "c.png").string()) == jsd::ReadMaskPng((dir_ / "i.png").string()));

  const std::string fused = (dir_ / "f.ckpt").string();
  const Result f = Cli("fuse " + model + " " + fused);
  ASSERT_EQ(f.code, 0) << f.out;
  ASSERT_EQ(Cli("segment " + (dir_ / "a.jsdc").string() + " -m " + fused + " -o " + (dir_ / "f.png").string()).code, 0);
  EXPECT_TRUE(jsd::ReadMaskPng((dir_ / "c.png").string()) == jsd::ReadMaskPng((dir_ / "f.png").string()));
  // Fusing twice is a usage error.
  EXPECT_EQ(Cli("fuse " + fused + " " + (dir_ / "g.ckpt").string()).code, 2);
}

TEST_F(CliTest, SweepAndPlot) {
  const std::string table = (dir_ / "rd.csv").string();
  const Result r = Cli("sweep" + kTiny + " --set train.max_steps=2 --alphas 0.2,0.8 -o " + table);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("spearman"), std::string::npos);
  const std::string csv = Slurp(table);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  ASSERT_EQ(Cli("plot " + table + " -o " + (dir_ / "rd.svg").string()).code, 0);
  const std::string svg = Slurp(dir_ / "rd.svg");
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST_F(CliTest, BenchPrintsReport) {
  const Result r = Cli("bench --preset paper-coco --csv " + (dir_ / "cost.csv").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("JD"), std::string::npos);
  EXPECT_NE(Slurp(dir_ / "cost.csv").find("cloud,"), std::string::npos);
}

TEST_F(CliTest, ConfigDumpRoundTrips) {
  const Result a = Cli("config --preset paper-cityscapes --alpha 0.7");
  ASSERT_EQ(a.code, 0);
  std::ofstream(dir_ / "c.cfg") << a.out;
  const Result b = Cli("config --config " + (dir_ / "c.cfg").string());
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, ExitCodesAndErrorLine) {
  Result r = Cli("config --set model.nonsense=1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("{\"error\":\"config\",\"exit\":2"), std::string::npos) << r.out;
  EXPECT_EQ(Cli("config --alpha 1.5").code, 2);
  EXPECT_EQ(Cli("encode /nonexistent.ppm -m /nonexistent.ckpt -o /tmp/x.jsdc").code, 3);
  EXPECT_EQ(Cli("bogus-command").code, 2);
  // A container for a server that is not there: transport failure.
  const fs::path data = dir_ / "data_exit";
  ASSERT_EQ(Cli("gen-data --count 1 --format ppm -o " + data.string()).code, 0);
  const std::string jsdc = (dir_ / "e.jsdc").string();
  ASSERT_EQ(Cli("encode " + (data / "image_000000.ppm").string() + " -m " + (dir_ / "m.ckpt").string() +
                " -o " + jsdc).code, 0);
  r = Cli("segment " + jsdc + " --server 127.0.0.1:1 -o " + (dir_ / "x.png").string());
  EXPECT_EQ(r.code, 4) << r.out;
  // Garbage where a container is expected.
  std::ofstream(dir_ / "junk.jsdc") << "JSDC not really a container";
  EXPECT_EQ(Cli("segment " + (dir_ / "junk.jsdc").string() + " -m " + (dir_ / "m.ckpt").string() + " -o " +
                (dir_ / "x.png").string()).code, 4);
}

}  // namespace
