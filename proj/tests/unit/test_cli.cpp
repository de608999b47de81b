// Copyright 2026 The flatsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "flatsim_tools/config.hpp"
#include "flatsim_tools/report.hpp"
#include "flatsim_tools/runner.hpp"

namespace flatsim::tools {
namespace {

namespace fs = std::filesystem;

const char* kSmall = R"(
[experiment]
name = small
dataflows = fa3, flat_hc, flat_async
[arch]
mesh_x = 8
mesh_y = 8
[workload]
seq = 256
head_dim = 64
heads = 4
batch = 1
[tiling]
mode = auto
flash_block = 64
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("flatsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }
  int run(const std::string& args) {
    const std::string cmd = std::string(FLATSIM_EXE) + " " + args + " -q 2>/dev/null >/dev/null";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }
  fs::path dir_;
};

TEST(Config, ParsesSections) {
  const Experiment e = parse_experiment(kSmall);
  EXPECT_EQ(e.name, "small");
  EXPECT_EQ(e.arch.noc.mesh_x, 8u);
  EXPECT_EQ(e.dataflows.size(), 3u);
  EXPECT_EQ(e.tiling.flash_block, 64u);
  ASSERT_EQ(expand_workloads(e).size(), 1u);
  EXPECT_EQ(expand_workloads(e)[0].seq_kv, 256u);
}

TEST(Config, GridsExpandInOrder) {
  const Experiment e = parse_experiment("[workload]\nseq = 128, 256\nhead_dim = 32, 64\n");
  const auto ws = expand_workloads(e);
  ASSERT_EQ(ws.size(), 4u);
  EXPECT_EQ(ws[0].seq_kv, 128u);
  EXPECT_EQ(ws[0].head_dim, 32u);
  EXPECT_EQ(ws[1].seq_kv, 256u);
  EXPECT_EQ(ws[2].head_dim, 64u);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_experiment("[arch]\nmesh_z = 3\n"), ConfigError);
  EXPECT_THROW(parse_experiment("[nonsense]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_experiment("[arch]\nmesh_x = many\n"), ConfigError);
  EXPECT_THROW(parse_experiment("[workload]\nseq =\n"), ConfigError);
  EXPECT_THROW(parse_experiment("[arch]\nmesh_x = 0\n"), ConfigError);
  EXPECT_THROW(parse_experiment("[experiment]\nformat = xml\n"), ConfigError);
  EXPECT_THROW(load_experiment("/nonexistent/flatsim.cfg"), ConfigError);
}

TEST(Report, CsvHeaderAndRows) {
  std::ostringstream out;
  ReportWriter w(out, OutputFormat::kCsv);
  Row a;
  a.set("name", std::string("x,y")).set("cycles", Value(std::uint64_t{42})).set("util", Value(0.5));
  Row b;
  b.set("name", std::string("z")).set("cycles", Value(std::uint64_t{7})).set("util", Value(0.25));
  w.write(a);
  w.write(b);
  EXPECT_EQ(out.str(), "name,cycles,util\n\"x,y\",42,0.5\nz,7,0.25\n");
  Row bad;
  bad.set("cycles", Value(std::uint64_t{1}));
  EXPECT_ANY_THROW(w.write(bad));
}

TEST(Report, JsonLines) {
  std::ostringstream out;
  ReportWriter w(out, OutputFormat::kJsonl);
  Row a;
  a.set("name", std::string("p")).set("ok", true).set("n", Value(std::int64_t{-3})).set("x", Value{});
  w.write(a);
  EXPECT_EQ(out.str(), "{\"name\":\"p\",\"ok\":true,\"n\":-3,\"x\":null}\n");
}

TEST(Runner, SimulateProducesOneRowPerDataflow) {
  const RunOutcome r = run_simulate(parse_experiment(kSmall));
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.failures, 0);
  for (const Row& row : r.rows) {
    EXPECT_EQ(format_value(*row.find("status")), "ok");
    EXPECT_EQ(format_value(*row.find("io_match")), "true");
  }
}

TEST(Runner, SimulateRejectsGrids) {
  Experiment e = parse_experiment(kSmall);
  e.workload.seq = {128, 256};
  EXPECT_THROW(run_simulate(e), ConfigError);
}

TEST(Runner, SweepIsDeterministicAcrossJobs) {
  Experiment e = parse_experiment(kSmall);
  e.workload.seq = {128, 256};
  auto render = [](const RunOutcome& r) {
    std::ostringstream out;
    ReportWriter w(out, OutputFormat::kCsv);
    for (const Row& row : r.rows) w.write(row);
    return out.str();
  };
  e.jobs = 1;
  const std::string one = render(run_sweep(e));
  e.jobs = 3;
  EXPECT_EQ(render(run_sweep(e)), one);
}

TEST(Validate, FunctionalSuitePasses) {
  ValidateSettings caps;
  caps.max_seq = 64;
  caps.max_head_dim = 16;
  caps.max_group = 2;
  const auto cases = validate_functional(caps, reference_arch());
  ASSERT_FALSE(cases.empty());
  for (const auto& c : cases) EXPECT_TRUE(c.pass) << c.name << ": " << c.error;
}

TEST(Validate, SwappedRescaleOperandsAreCaught) {
  ValidateSettings caps;
  caps.max_seq = 64;
  caps.max_head_dim = 16;
  caps.max_group = 2;
  const auto mutate = [](Schedule& s) {
    for (StepId i = 0; i < s.size(); ++i) {
      Step& st = s.mutable_step(i);
      if (st.kind == StepKind::kVectorOp && st.vop == VectorOp::kRescale)
        std::swap(st.operands[0], st.operands[1]);
    }
  };
  const auto cases = validate_functional(caps, reference_arch(), mutate);
  int failed = 0;
  for (const auto& c : cases) failed += c.pass ? 0 : 1;
  EXPECT_GT(failed, 0);
}

TEST_F(Workdir, ExitCodes) {
  const fs::path good = write("good.cfg", kSmall);
  EXPECT_EQ(run("simulate " + good.string() + " -o " + (dir_ / "a.csv").string()), 0);
  EXPECT_EQ(run("simulate " + (dir_ / "missing.cfg").string()), 1);
  EXPECT_EQ(run("simulate " + write("bad.cfg", "[arch]\nmesh_z = 1\n").string()), 1);
  EXPECT_EQ(run("simulate " + write("empty.cfg", "[workload]\nbatch = ,\n").string()), 1);
  EXPECT_EQ(run("simulate"), 1);
  EXPECT_EQ(run("frobnicate " + good.string()), 1);
  EXPECT_EQ(run("simulate " + write("dup.cfg", std::string(kSmall) + "[arch]\n").string()), 1);
  std::string big = kSmall;
  big.replace(big.find("seq = 256"), 9, "seq = 1024");
  big.replace(big.find("mode = auto"), 11,
              "mode = manual\ngx = 1\ngy = 1\nslice_r = 512\nslice_c = 512");
  const fs::path overflow = write("overflow.cfg", big);
  EXPECT_EQ(run("simulate " + overflow.string() + " -o " + (dir_ / "b.csv").string()), 2);
}

TEST_F(Workdir, OutputIsByteIdenticalAcrossRuns) {
  const fs::path cfg = write("good.cfg", kSmall);
  for (const char* fmt : {"csv", "jsonl"}) {
    const fs::path a = dir_ / (std::string("a.") + fmt), b = dir_ / (std::string("b.") + fmt);
    ASSERT_EQ(run("simulate " + cfg.string() + " -f " + fmt + " -o " + a.string()), 0);
    ASSERT_EQ(run("simulate " + cfg.string() + " -f " + fmt + " -o " + b.string()), 0);
    const std::string x = slurp(a);
    EXPECT_FALSE(x.empty());
    EXPECT_EQ(x, slurp(b));
  }
  const std::string csv = slurp(dir_ / "a.csv");
  EXPECT_EQ(csv.rfind("schema_version,experiment,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

}  // namespace
}  // namespace flatsim::tools
