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

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "flatsim/dataflows.hpp"
#include "flatsim/noc.hpp"
#include "flatsim/sim.hpp"
#include "flatsim/tiling.hpp"
#include "flatsim/wafer.hpp"
#include "flatsim_tools/config.hpp"
#include "flatsim_tools/runner.hpp"

namespace {

using namespace flatsim;
using namespace flatsim::tools;
namespace fs = std::filesystem;

// Failed checks and notes are prefixed with '!'.
struct Verdict {
  bool pass = true;
  std::vector<std::string> checks;
  std::vector<std::string> notes;

  void check(bool ok, std::string what) {
    pass = pass && ok;
    checks.push_back((ok ? "" : "!") + std::move(what));
  }
};

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

AttentionWorkload prefill(std::uint32_t B, std::uint32_t H, std::uint32_t S, std::uint32_t D) {
  AttentionWorkload w;
  w.batch = B;
  w.heads = H;
  w.seq_q = w.seq_kv = S;
  w.head_dim = D;
  return w;
}

SimReport run(const Schedule& s, const ArchConfig& arch) {
  return simulate(s, arch, SimMode::kTiming);
}

Bytes traffic(const SimReport& r) { return r.hbm_bytes_read + r.hbm_bytes_written; }

Verdict functional() {
  ValidateSettings caps;  // S <= 128, D <= 32, groups <= 4x4, 1e-6
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = validate_functional(caps, reference_arch());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Verdict v;
  int failed = 0;
  double worst = 0;
  for (const auto& c : cases) {
    if (!c.pass) {
      ++failed;
      if (failed <= 3) v.notes.push_back("!" + c.name + ": " + c.error);
    }
    worst = std::max(worst, c.max_rel_error);
  }
  v.check(failed == 0, fmt::format("{} of {} cases pass, max rel error {:.2e}",
                                   cases.size() - failed, cases.size(), worst));
  v.check(secs < 60, fmt::format("runtime {:.1f} s", secs));
  return v;
}

Verdict io_exactness() {
  Verdict v;
  const ArchConfig arch = reference_arch();
  int points = 0, exact = 0;
  struct FaPoint {
    std::uint32_t S, D, M;
    FlashVariant var;
  };
  for (const FaPoint& p : std::vector<FaPoint>{{256, 64, 64, FlashVariant::kFa2},
                                               {512, 64, 128, FlashVariant::kFa3},
                                               {1024, 128, 64, FlashVariant::kFa2},
                                               {1024, 64, 128, FlashVariant::kFa3},
                                               {2048, 128, 128, FlashVariant::kFa2},
                                               {2048, 64, 64, FlashVariant::kFa3},
                                               {4096, 128, 128, FlashVariant::kFa3},
                                               {4096, 64, 256, FlashVariant::kFa2},
                                               {384, 32, 128, FlashVariant::kFa3},
                                               {128, 128, 128, FlashVariant::kFa2}}) {
    const AttentionWorkload w = prefill(1, 4, p.S, p.D);
    const Bytes sim = traffic(run(gen_flashattention(w, arch, p.var, p.M), arch));
    const Bytes model = io_flash(1, 4, p.D, p.S, p.M).bytes_total;
    ++points;
    exact += sim == model;
    if (sim != model) v.notes.push_back(fmt::format("!fa S={} D={} M={}: {} vs {}", p.S, p.D, p.M, sim, model));
  }
  struct FlatPoint {
    std::uint32_t S, D, g, slice;
    Dataflow d;
  };
  for (const FlatPoint& p : std::vector<FlatPoint>{{256, 64, 2, 64, Dataflow::kFlatSc},
                                                   {512, 64, 4, 64, Dataflow::kFlatTc},
                                                   {512, 128, 2, 128, Dataflow::kFlatHc},
                                                   {1024, 64, 4, 128, Dataflow::kFlatAsync},
                                                   {1024, 128, 8, 64, Dataflow::kFlatSc},
                                                   {2048, 64, 4, 128, Dataflow::kFlatTc},
                                                   {2048, 128, 8, 128, Dataflow::kFlatHc},
                                                   {4096, 128, 8, 128, Dataflow::kFlatAsync},
                                                   {4096, 64, 16, 128, Dataflow::kFlatHc},
                                                   {4096, 128, 32, 128, Dataflow::kFlatAsync}}) {
    const AttentionWorkload w = prefill(1, 4, p.S, p.D);
    const FlatParams fp = make_flat_params(p.d, p.g, p.g, p.slice, p.slice);
    const Bytes sim = traffic(run(gen_flatattention(w, arch, fp), arch));
    const Bytes model = io_flat(1, 4, p.D, p.S, p.slice, p.g).bytes_total;
    ++points;
    exact += sim == model;
    if (sim != model)
      v.notes.push_back(fmt::format("!flat S={} D={} g={}: {} vs {}", p.S, p.D, p.g, sim, model));
  }
  v.check(exact == points, fmt::format("{}/{} grid points exact", exact, points));

  const AttentionWorkload w = prefill(1, 2, 4096, 128);
  const Bytes fa = traffic(run(gen_flashattention(w, arch, FlashVariant::kFa3, 128), arch));
  const Bytes flat = traffic(
      run(gen_flatattention(w, arch, make_flat_params(Dataflow::kFlatAsync, 8, 8, 128, 128)), arch));
  v.check(fa * 5 == flat * 33,
          fmt::format("S=4096 M=128 N=8 simulated ratio {}/{} = {:.4f} (33/5 = 6.6)", fa, flat,
                      static_cast<double>(fa) / flat));
  return v;
}

Verdict collective_ratios() {
  Verdict v;
  const ArchConfig arch = reference_arch();
  auto t = [&](CollectiveKind k, CollectiveStrategy s) {
    CollectiveRequest r;
    r.kind = k;
    r.strategy = s;
    r.size = Bytes{1} << 20;
    r.group_extent = arch.noc.mesh_x;
    return static_cast<double>(collective_time(r, arch.noc, arch.tile));
  };
  using K = CollectiveKind;
  using S = CollectiveStrategy;
  const double mc_seq = t(K::kMulticast, S::kSwSeq) / t(K::kMulticast, S::kHw);
  const double mc_tree = t(K::kMulticast, S::kSwTree) / t(K::kMulticast, S::kHw);
  const double rd_seq = t(K::kReduceSum, S::kSwSeq) / t(K::kReduceSum, S::kHw);
  const double rd_tree = t(K::kReduceSum, S::kSwTree) / t(K::kReduceSum, S::kHw);
  v.check(within(mc_seq, 27, 34), fmt::format("multicast HW/SW.Seq {:.1f}x in [27, 34]", mc_seq));
  v.check(within(mc_tree, 4.3, 6.0), fmt::format("multicast HW/SW.Tree {:.2f}x in [4.3, 6.0]", mc_tree));
  v.check(within(rd_seq, 45, 80), fmt::format("reduce HW/SW.Seq {:.1f}x in [45, 80]", rd_seq));
  v.check(within(rd_tree, 8, 14), fmt::format("reduce HW/SW.Tree {:.2f}x in [8, 14]", rd_tree));
  return v;
}

Verdict flat_vs_fa3() {
  Verdict v;
  const ArchConfig arch = reference_arch();
  const AttentionWorkload w = prefill(2, 32, 4096, 128);
  TilingSettings tiling;
  const BuiltSchedule fa = build_schedule(w, arch, Dataflow::kFa3, tiling);
  const BuiltSchedule fl = build_schedule(w, arch, Dataflow::kFlatAsync, tiling);
  const SimReport a = run(fa.schedule, arch);
  const SimReport b = run(fl.schedule, arch);
  const double speedup = static_cast<double>(a.total_cycles) / b.total_cycles;
  const double reduction = static_cast<double>(traffic(a)) / traffic(b);
  v.check(within(speedup, 3.0, 5.2),
          fmt::format("speedup {:.2f}x in [3.0, 5.2] (FA3 {} cycles, FlatAsync {}x{} {} cycles)",
                      speedup, a.total_cycles, fl.tiling.gx, fl.tiling.gy, b.total_cycles));
  v.check(within(reduction, 13, 16), fmt::format("HBM traffic reduction {:.2f}x in [13, 16]", reduction));
  return v;
}

Verdict utilization() {
  Verdict v;
  const ArchConfig arch = reference_arch();
  for (std::uint32_t g : {16u, 32u}) {
    TilingSettings tiling;
    tiling.gx = tiling.gy = g;
    const SimReport r = run(build_schedule(prefill(4, 32, 4096, 128), arch, Dataflow::kFlatAsync, tiling).schedule, arch);
    v.check(within(r.matrix_window_utilization, 0.87, 0.96),
            fmt::format("{0}x{0} S=4096 utilization {1:.3f} in [0.87, 0.96] (mesh-wide {2:.3f})", g,
                        r.matrix_window_utilization, r.matrix_utilization));
  }
  TilingSettings tiling;
  tiling.gx = tiling.gy = 32;
  const SimReport r = run(build_schedule(prefill(4, 32, 512, 128), arch, Dataflow::kFlatAsync, tiling).schedule, arch);
  v.check(r.matrix_window_utilization <= 0.25,
          fmt::format("32x32 S=512 active-period utilization {:.3f} <= 0.25",
                      r.matrix_window_utilization));
  return v;
}

Verdict tiling_selection() {
  Verdict v;
  const ArchConfig arch = reference_arch();
  const TilingChoice t = select_tiling(prefill(2, 32, 4096, 128), arch, true);
  v.check(t.slice_r == 128 && t.slice_c == 128, fmt::format("slice {}x{}", t.slice_r, t.slice_c));
  v.check(t.predicted_util >= 0.95, fmt::format("GEMM utilization {:.4f} >= 0.95", t.predicted_util));
  v.check(t.l1_footprint <= 384 * 1024,
          fmt::format("footprint {} B <= {} B", t.l1_footprint, 384 * 1024));
  return v;
}

Verdict ordering() {
  Verdict v;
  const ArchConfig arch = reference_arch();
  int points = 0, ordered = 0;
  for (std::uint32_t D : {64u, 128u}) {
    for (std::uint32_t S : {1024u, 2048u, 4096u}) {
      const AttentionWorkload w = prefill(2, 32, S, D);
      std::vector<Cycles> c;
      for (Dataflow d : {Dataflow::kFlatAsync, Dataflow::kFlatHc, Dataflow::kFlatTc, Dataflow::kFlatSc})
        c.push_back(run(build_schedule(w, arch, d, {}).schedule, arch).total_cycles);
      ++points;
      const bool ok = c[0] <= c[1] && c[1] <= c[2] && c[2] <= c[3];
      ordered += ok;
      if (!ok)
        v.notes.push_back(fmt::format("!S={} D={}: {} {} {} {}", S, D, c[0], c[1], c[2], c[3]));
    }
  }
  v.check(ordered == points,
          fmt::format("Async <= HC <= TC <= SC at {}/{} grid points", ordered, points));

  std::size_t cases = 0, bad = 0;
  for (CollectiveKind k : {CollectiveKind::kMulticast, CollectiveKind::kReduceSum, CollectiveKind::kReduceMax}) {
    for (std::uint32_t e = 1; e <= arch.noc.mesh_x; ++e) {
      for (Bytes flits = 1; flits <= 16384; flits = flits < 64 ? flits + 1 : flits * 2 + 1) {
        CollectiveRequest r;
        r.kind = k;
        r.group_extent = e;
        r.size = flits * arch.noc.link_bytes_per_cycle;
        r.strategy = CollectiveStrategy::kHw;
        const Cycles hw = collective_time(r, arch.noc, arch.tile);
        r.strategy = CollectiveStrategy::kSwTree;
        const Cycles tree = collective_time(r, arch.noc, arch.tile);
        r.strategy = CollectiveStrategy::kSwSeq;
        const Cycles seq = collective_time(r, arch.noc, arch.tile);
        ++cases;
        bad += !(hw <= tree && tree <= seq);
      }
    }
  }
  v.check(bad == 0, fmt::format("HW <= SW.Tree <= SW.Seq in {}/{} collective cases", cases - bad, cases));
  return v;
}

Verdict wafer_serving() {
  Verdict v;
  WaferModel model;
  const WaferConfig wafer;
  ParallelismPlan plan;
  plan.ep_degree = 32;
  plan.pp_degree = 2;
  plan.batch_per_chip = 256;
  const ServingReport flat = model.serve(plan, wafer, AttentionDataflow::kFlatAttention);
  const ServingReport fa = model.serve(plan, wafer, AttentionDataflow::kFlashMlaLike);
  v.check(within(flat.per_chip_throughput, 0.7 * 6940, 1.3 * 6940),
          fmt::format("per-chip {:.0f} tok/s within 30% of 6940", flat.per_chip_throughput));
  v.check(within(flat.tpot_ms, 0.7 * 35.8, 1.3 * 35.8),
          fmt::format("TPOT {:.2f} ms within 30% of 35.8", flat.tpot_ms));
  const double ratio = flat.system_throughput / fa.system_throughput;
  v.check(within(ratio, 1.6, 2.6), fmt::format("Flat/FlashMLA-like throughput {:.2f}x in [1.6, 2.6]", ratio));
  v.check(within(flat.attention_fraction, 0.32, 0.52),
          fmt::format("Flat attention fraction {:.1f}% in [32, 52]", 100 * flat.attention_fraction));
  v.check(within(fa.attention_fraction, 0.61, 0.81),
          fmt::format("FlashMLA-like attention fraction {:.1f}% in [61, 81]", 100 * fa.attention_fraction));
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  Verdict v;
  const fs::path dir = fs::temp_directory_path() / "flatsim_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  struct Job {
    const char* cmd;
    const char* cfg;
  };
  int same = 0, total = 0;
  for (const Job& j : std::vector<Job>{{"simulate", "ref32x32"},
                                       {"sweep", "prefill_grid"},
                                       {"sweep", "group_scaling"},
                                       {"sweep", "decode_grid"},
                                       {"sweep", "mla_decode"},
                                       {"sweep", "collectives"},
                                       {"autotune", "autotune"},
                                       {"wafer", "wafer"},
                                       {"wafer", "wafer_ep"},
                                       {"validate", "validate"}}) {
    std::size_t hash[2] = {0, 0};
    bool ran = true;
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / fmt::format("{}.{}.csv", j.cfg, k);
      const std::string cmd = fmt::format("{} {} {}/{}.cfg -q -o {} > /dev/null 2>&1", FLATSIM_EXE,
                                          j.cmd, FLATSIM_CONFIG_DIR, j.cfg, out.string());
      const int st = std::system(cmd.c_str());
      ran = ran && WIFEXITED(st) && WEXITSTATUS(st) == 0;
      hash[k] = std::hash<std::string>{}(slurp(out));
    }
    ++total;
    const bool ok = ran && hash[0] == hash[1];
    same += ok;
    v.notes.push_back(fmt::format("{}{} {:016x}", ok ? "" : "!", j.cfg, hash[0]));
  }
  fs::remove_all(dir);
  v.check(same == total, fmt::format("{}/{} experiments byte-identical on re-run", same, total));
  return v;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Verdict()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  bool verbose = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "-v" || a == "--verbose") verbose = true;
    else if (a == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
    else {
      std::cerr << "usage: acceptance [--only N] [-v]\n";
      return 2;
    }
  }
  const std::vector<Criterion> all{
      {1, "functional correctness", functional},
      {2, "I/O exactness", io_exactness},
      {3, "collective ratios", collective_ratios},
      {4, "FlatAsync vs FA3", flat_vs_fa3},
      {5, "utilization targets", utilization},
      {6, "tiling selection", tiling_selection},
      {7, "ordering properties", ordering},
      {8, "wafer serving", wafer_serving},
      {9, "determinism", determinism},
  };
  int failed = 0;
  for (const Criterion& c : all) {
    if (only && c.id != only) continue;
    Verdict v;
    try {
      v = c.fn();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : v.checks) detail += (detail.empty() ? "" : "; ") + n;
    for (const auto& n : v.notes)
      if (verbose || (!n.empty() && n[0] == '!')) detail += "; " + n;
    std::cout << fmt::format("criterion {}: {} {}: {}\n", c.id, v.pass ? "PASS" : "FAIL", c.title, detail)
              << std::flush;
    failed += !v.pass;
  }
  return failed ? 1 : 0;
}
