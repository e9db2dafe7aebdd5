// Copyright 2026 The iotlbsim Authors.
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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "iotlbsim/cli.hpp"

namespace iotlbsim {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "iotlbsim");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("iotlbsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  fs::path dir_;
};

TEST_F(Cli, FindEvsetsWritesTablesAndManifest) {
  const CliResult r = run({"find-evsets", "--seed", "3", "--out", out("fe")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "fe" / "evsets.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "fe" / "evset_sizes.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "fe" / "config.json"));
  const std::string csv = slurp(dir_ / "fe" / "evsets.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "algorithm,flush,seed,number_of_sets,mean_set_size,useful_sets_per_target,average_best_eviction_rate");
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "fe" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "find-evsets");
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["config_digest"].get<std::string>().rfind("fnv1a64:", 0), 0u);
}

TEST_F(Cli, ChannelPpHello) {
  const CliResult r = run({"channel-pp", "--message", "Hello", "--out", out("pp")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ber=0 "), std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir_ / "pp" / "channel_report.json"));
  EXPECT_EQ(report["decoded_text"], "Hello");
  EXPECT_EQ(report["bit_error_rate"], 0.0);
}

TEST_F(Cli, ChannelFrPattern) {
  const CliResult r = run({"channel-fr", "--pattern", "alternating", "--length", "64", "--out", out("fr")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ber=0 "), std::string::npos);
}

TEST_F(Cli, FlushOnNoFlushProfileFails) {
  const CliResult r = run({"find-evsets", "--profile", "noflush-118-random", "--flush", "--out", out("x")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("FlushUnavailable"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "x" / "manifest.json"));
}

TEST_F(Cli, UnknownSubcommandShowsHelp) {
  const CliResult r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown subcommand 'frobnicate'"), std::string::npos);
  EXPECT_NE(r.err.find("find-evsets"), std::string::npos);
}

TEST_F(Cli, HelpExitsCleanly) {
  const CliResult r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("validate-config"), std::string::npos);
}

TEST_F(Cli, ValidateConfig) {
  fs::create_directories(dir_);
  const fs::path good = dir_ / "good.json";
  const fs::path bad = dir_ / "bad.json";
  std::ofstream(good) << R"({"tlb": {"ways": 8}})";
  std::ofstream(bad) << R"({"tlb": {"ways": 0}})";
  const CliResult ok = run({"validate-config", good.string()});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(parse_config(ok.out).tlb.ways, 8u);
  const CliResult no = run({"validate-config", bad.string()});
  EXPECT_EQ(no.code, 1);
  EXPECT_NE(no.err.find("tlb.ways"), std::string::npos);
}

TEST_F(Cli, JsonlFormat) {
  const CliResult r = run({"find-evsets", "--format", "jsonl", "--out", out("j")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(dir_ / "j" / "evsets.jsonl");
  const auto row = nlohmann::json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(row["number_of_sets"], 1);
}

TEST_F(Cli, OutputsAreDeterministic) {
  ASSERT_EQ(run({"scenario", "nic", "--reboots", "5", "--seed", "4", "--out", out("a")}).code, 0);
  ASSERT_EQ(run({"scenario", "nic", "--reboots", "5", "--seed", "4", "--out", out("b")}).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "a")) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / e.path().filename())) << e.path().filename();
  }
  EXPECT_GE(files, 3u);
  ASSERT_EQ(run({"scenario", "nic", "--reboots", "5", "--seed", "5", "--out", out("c")}).code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "manifest.json"), slurp(dir_ / "c" / "manifest.json"));
}

}  // namespace
}  // namespace iotlbsim
