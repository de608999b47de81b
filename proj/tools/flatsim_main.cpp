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

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flatsim/sim.hpp"
#include "flatsim_tools/config.hpp"
#include "flatsim_tools/report.hpp"
#include "flatsim_tools/runner.hpp"

namespace {

using namespace flatsim::tools;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSim = 2;

struct Options {
  std::string config;
  std::string output;
  std::string format;
  unsigned jobs = 0;
  bool quiet = false;
};

int emit(const Experiment& e, const RunOutcome& r, const Options& o) {
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!e.output.empty() && e.output != "-") {
    file.open(e.output, std::ios::out | std::ios::trunc);
    if (!file) {
      std::cerr << "flatsim: cannot write '" << e.output << "'\n";
      return kExitConfig;
    }
    out = &file;
  }
  ReportWriter w(*out, e.format);
  for (const Row& row : r.rows) w.write(row);
  out->flush();
  if (!o.quiet) {
    for (const Row& row : r.rows) {
      const Value* st = row.find("status");
      const Value* err = row.find("error");
      if (st && format_value(*st) != "ok" && format_value(*st) != "pass")
        std::cerr << "flatsim: point " << format_value(*row.find("point")) << ": "
                  << (err ? format_value(*err) : std::string("failed")) << '\n';
    }
    if (!e.output.empty() && e.output != "-")
      std::cerr << "flatsim: wrote " << r.rows.size() << " rows to " << e.output << '\n';
  }
  return r.failures > 0 ? kExitSim : kExitOk;
}

template <typename Fn>
int run(const Options& o, Fn&& fn) {
  Experiment e;
  try {
    e = load_experiment(o.config);
    if (!o.output.empty()) e.output = o.output;
    if (!o.format.empty()) e.format = output_format_from_string(o.format);
    if (o.jobs > 0) e.jobs = o.jobs;
  } catch (const ConfigError& ex) {
    std::cerr << "flatsim: config error: " << ex.what() << '\n';
    return kExitConfig;
  }
  RunOutcome r;
  try {
    r = fn(e);
  } catch (const ConfigError& ex) {
    std::cerr << "flatsim: config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& ex) {
    std::cerr << "flatsim: simulation error: " << ex.what() << '\n';
    return kExitSim;
  }
  return emit(e, r, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flatsim: tile-mesh attention dataflow simulator"};
  app.require_subcommand(1);
  Options o;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", o.config, "experiment config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", o.output, "output path, '-' for stdout (overrides config)");
    sub->add_option("-f,--format", o.format, "csv or jsonl (overrides config)")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    sub->add_option("-j,--jobs", o.jobs, "concurrent sweep points");
    sub->add_flag("-q,--quiet", o.quiet, "no progress on stderr");
    return sub;
  };
  CLI::App* simulate = add("simulate", "simulate one workload under each configured dataflow");
  CLI::App* sweep = add("sweep", "simulate the full workload grid (or collective grid)");
  CLI::App* autotune = add("autotune", "report slice candidates and the selected tiling");
  CLI::App* wafer = add("wafer", "estimate wafer-scale decode throughput and TPOT");
  CLI::App* validate = add("validate", "run the functional oracle suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*simulate) return run(o, run_simulate);
  if (*sweep) return run(o, run_sweep);
  if (*autotune) return run(o, run_autotune);
  if (*wafer) return run(o, run_wafer);
  if (*validate) return run(o, run_validate);
  return kExitConfig;
}
