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

#include "flatsim_tools/runner.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include <fmt/format.h>

#include "flatsim/noc.hpp"
#include "flatsim/sim.hpp"
#include "flatsim/wafer.hpp"

namespace flatsim::tools {

namespace {

template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

void workload_columns(Row& r, const AttentionWorkload& w) {
  r.set("variant", to_string(w.variant))
      .set("batch", w.batch)
      .set("heads", w.heads)
      .set("head_dim", w.head_dim)
      .set("seq_q", w.seq_q)
      .set("seq_kv", w.seq_kv)
      .set("group_size", w.group_size)
      .set("spec_len", w.spec_len)
      .set("latent_rank", w.latent_rank)
      .set("rope_dim", w.rope_dim)
      .set("causal", Value(w.causal));
}

Row attention_row(const Experiment& e, std::size_t index, const AttentionWorkload& w,
                  Dataflow d, int& failures) {
  Row r;
  r.set("schema_version", kSchemaVersion).set("experiment", e.name.c_str());
  r.set("point", Value(std::uint64_t{index}));
  workload_columns(r, w);
  r.set("dataflow", to_string(d));
  static const char* kReportCols[] = {
      "gx", "gy", "slice_r", "slice_c", "steps", "total_cycles", "time_us",
      "exposed_matrix_engine", "exposed_vector_softmax", "exposed_inter_tile_comm",
      "exposed_hbm_access", "exposed_sync_overhead", "matrix_utilization",
      "matrix_active_utilization", "matrix_window_utilization", "avg_hbm_bw_utilization",
      "hbm_bytes_read", "hbm_bytes_written", "flops", "io_model_bytes", "io_match"};
  for (const char* c : kReportCols) r.set(c, Value{});
  try {
    const BuiltSchedule b = build_schedule(w, e.arch, d, e.tiling);
    const SimReport rep = simulate(b.schedule, e.arch, SimMode::kTiming);
    r.set("gx", b.tiling.gx).set("gy", b.tiling.gy);
    r.set("slice_r", b.tiling.slice_r).set("slice_c", b.tiling.slice_c);
    r.set("steps", Value(std::uint64_t{rep.steps}));
    r.set("total_cycles", Value(std::uint64_t{rep.total_cycles}));
    r.set("time_us", Value(static_cast<double>(rep.total_cycles) / e.arch.frequency_hz * 1e6));
    for (std::size_t c = 0; c < kNumCategories; ++c)
      r.set(fmt::format("exposed_{}", to_string(static_cast<Category>(c))),
            Value(rep.exposed[c]));
    r.set("matrix_utilization", Value(rep.matrix_utilization));
    r.set("matrix_active_utilization", Value(rep.matrix_active_utilization));
    r.set("matrix_window_utilization", Value(rep.matrix_window_utilization));
    r.set("avg_hbm_bw_utilization", Value(rep.avg_hbm_bw_utilization));
    r.set("hbm_bytes_read", Value(std::uint64_t{rep.hbm_bytes_read}));
    r.set("hbm_bytes_written", Value(std::uint64_t{rep.hbm_bytes_written}));
    r.set("flops", Value(rep.flops));
    if (const Bytes io = closed_form_io(w, d, b.tiling); io > 0) {
      r.set("io_model_bytes", Value(std::uint64_t{io}));
      r.set("io_match", Value(io == rep.hbm_bytes_read + rep.hbm_bytes_written));
    }
    r.set("status", "ok").set("error", "");
  } catch (const std::exception& ex) {
    ++failures;
    r.set("status", "error").set("error", ex.what());
  }
  return r;
}

RunOutcome run_attention(const Experiment& e, const std::vector<AttentionWorkload>& grid) {
  struct Point {
    std::size_t w;
    Dataflow d;
  };
  std::vector<Point> points;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (Dataflow d : e.dataflows) points.push_back({i, d});
  std::vector<Row> rows(points.size());
  std::vector<int> fails(points.size(), 0);
  parallel_for(points.size(), e.jobs, [&](std::size_t i) {
    rows[i] = attention_row(e, i, grid[points[i].w], points[i].d, fails[i]);
  });
  RunOutcome out;
  out.rows = std::move(rows);
  for (int f : fails) out.failures += f;
  return out;
}

}  // namespace

BuiltSchedule build_schedule(const AttentionWorkload& w, const ArchConfig& arch, Dataflow d,
                             const TilingSettings& tiling) {
  BuiltSchedule b;
  if (!is_flat(d)) {
    const std::uint32_t M = tiling.flash_block;
    b.schedule = gen_flashattention(
        w, arch, d == Dataflow::kFa3 ? FlashVariant::kFa3 : FlashVariant::kFa2, M);
    b.tiling.slice_r = M;
    b.tiling.slice_c = M;
    b.tiling.l1_footprint = 0;
    return b;
  }
  const bool async = d == Dataflow::kFlatAsync;
  if (tiling.mode == TilingMode::kManual) {
    b.tiling.gx = tiling.gx;
    b.tiling.gy = tiling.gy;
    b.tiling.slice_r = tiling.slice_r;
    b.tiling.slice_c = tiling.slice_c;
    b.tiling.l1_footprint = l1_footprint(w, tiling.slice_r, tiling.slice_c, async);
  } else if (tiling.gx > 0 && tiling.gy > 0) {
    b.tiling = tiling_for_group(w, arch, async, tiling.gx, tiling.gy);
  } else {
    b.tiling = select_tiling(w, arch, async);
  }
  const FlatParams p =
      make_flat_params(d, b.tiling.gx, b.tiling.gy, b.tiling.slice_r, b.tiling.slice_c);
  b.schedule = w.variant == AttentionVariant::kMhaPrefill ? gen_flatattention(w, arch, p)
                                                          : gen_flat_decode(w, arch, p);
  return b;
}

Bytes closed_form_io(const AttentionWorkload& w, Dataflow d, const TilingChoice& t) {
  if (w.variant != AttentionVariant::kMhaPrefill || w.causal) return 0;
  if (!is_flat(d))
    return io_flash(w.batch, w.heads, w.head_dim, w.seq_kv, t.slice_r, w.dtype_bytes).bytes_total;
  return io_flat(w.batch, w.heads, w.head_dim, w.seq_kv, t.slice_r, t.gy, w.dtype_bytes)
      .bytes_total;
}

RunOutcome run_simulate(const Experiment& e) {
  const auto grid = expand_workloads(e);
  if (grid.size() != 1)
    throw ConfigError(fmt::format("simulate expects one workload point, the grid has {}; use sweep",
                                  grid.size()));
  return run_attention(e, grid);
}

RunOutcome run_sweep(const Experiment& e) {
  if (e.collectives.sizes.empty()) return run_attention(e, expand_workloads(e));
  RunOutcome out;
  std::size_t index = 0;
  for (CollectiveKind k : e.collectives.kinds) {
    for (Bytes size : e.collectives.sizes) {
      for (CollectiveStrategy s :
           {CollectiveStrategy::kHw, CollectiveStrategy::kSwTree, CollectiveStrategy::kSwSeq}) {
        CollectiveRequest req;
        req.kind = k;
        req.strategy = s;
        req.size = size;
        req.group_extent = e.collectives.extent;
        Row r;
        r.set("schema_version", kSchemaVersion).set("experiment", e.name.c_str());
        r.set("point", Value(std::uint64_t{index++}));
        r.set("collective", to_string(k)).set("strategy", to_string(s));
        r.set("extent", e.collectives.extent).set("bytes", Value(std::uint64_t{size}));
        try {
          const Cycles t = collective_time(req, e.arch.noc, e.arch.tile);
          r.set("cycles", Value(std::uint64_t{t})).set("status", "ok").set("error", "");
        } catch (const std::exception& ex) {
          ++out.failures;
          r.set("cycles", Value{}).set("status", "error").set("error", ex.what());
        }
        out.rows.push_back(std::move(r));
      }
    }
  }
  return out;
}

RunOutcome run_autotune(const Experiment& e) {
  RunOutcome out;
  const auto grid = expand_workloads(e);
  const bool async = std::find(e.dataflows.begin(), e.dataflows.end(), Dataflow::kFlatAsync) !=
                     e.dataflows.end();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const AttentionWorkload& w = grid[i];
    TilingChoice chosen;
    std::string err;
    try {
      chosen = select_tiling(w, e.arch, async);
    } catch (const std::exception& ex) {
      err = ex.what();
      ++out.failures;
    }
    const EffectiveAttention eff = effective_attention(w);
    for (std::uint32_t s = 16; s <= 512; s *= 2) {
      Row r;
      r.set("schema_version", kSchemaVersion).set("experiment", e.name.c_str());
      r.set("point", Value(std::uint64_t{i}));
      workload_columns(r, w);
      r.set("async", Value(async)).set("slice", s);
      const Bytes fp = l1_footprint(w, s, s, async);
      r.set("gemm_utilization", Value(slice_utilization(eff, s, s, e.arch.tile)));
      r.set("l1_footprint", Value(std::uint64_t{fp}));
      r.set("fits_l1", Value(fp <= e.arch.tile.l1_capacity));
      const bool sel = err.empty() && chosen.slice_c == s;
      r.set("selected", Value(sel));
      r.set("gx", sel ? Value(std::uint64_t{chosen.gx}) : Value{});
      r.set("gy", sel ? Value(std::uint64_t{chosen.gy}) : Value{});
      r.set("slice_r", sel ? Value(std::uint64_t{chosen.slice_r}) : Value{});
      r.set("status", err.empty() ? "ok" : "error").set("error", err);
      out.rows.push_back(std::move(r));
    }
  }
  return out;
}

RunOutcome run_wafer(const Experiment& e) {
  RunOutcome out;
  WaferModel model;
  std::vector<std::uint32_t> eps = e.wafer.ep_degrees;
  if (eps.empty()) eps.push_back(e.wafer.plan.ep_degree);
  std::size_t index = 0;
  for (std::uint32_t ep : eps) {
    for (std::uint32_t batch : e.wafer.batches) {
      for (AttentionDataflow d : e.wafer.dataflows) {
        ParallelismPlan plan = e.wafer.plan;
        plan.ep_degree = ep;
        plan.batch_per_chip = batch;
        Row r;
        r.set("schema_version", kSchemaVersion).set("experiment", e.name.c_str());
        r.set("point", Value(std::uint64_t{index++}));
        r.set("attention", to_string(d)).set("ep_degree", ep).set("pp_degree", plan.pp_degree);
        r.set("batch_per_chip", batch).set("spec_len", plan.spec_len);
        r.set("kv_len", plan.kv_len).set("d2d_bandwidth", Value(e.wafer.wafer.d2d_bandwidth));
        for (const char* c : {"t_iter_s", "tpot_ms", "system_throughput", "per_chip_throughput",
                              "c2c_fraction", "attention_fraction", "layer_us"})
          r.set(c, Value{});
        try {
          const ServingReport s = model.serve(plan, e.wafer.wafer, d);
          r.set("t_iter_s", Value(s.t_iter)).set("tpot_ms", Value(s.tpot_ms));
          r.set("system_throughput", Value(s.system_throughput));
          r.set("per_chip_throughput", Value(s.per_chip_throughput));
          r.set("c2c_fraction", Value(s.c2c_fraction));
          r.set("attention_fraction", Value(s.attention_fraction));
          r.set("layer_us", Value(s.layer_seconds * 1e6));
          r.set("status", "ok").set("error", "");
        } catch (const std::exception& ex) {
          ++out.failures;
          r.set("status", "error").set("error", ex.what());
        }
        out.rows.push_back(std::move(r));
      }
    }
  }
  return out;
}

RunOutcome run_validate(const Experiment& e) {
  RunOutcome out;
  const auto cases = validate_functional(e.validate, e.arch);
  std::size_t index = 0;
  for (const auto& c : cases) {
    Row r;
    r.set("schema_version", kSchemaVersion).set("experiment", e.name.c_str());
    r.set("point", Value(std::uint64_t{index++}));
    r.set("case", c.name.c_str());
    r.set("max_rel_error", Value(c.max_rel_error));
    r.set("tolerance", Value(e.validate.tolerance));
    r.set("schedule_ok", Value(c.schedule_ok));
    r.set("status", c.pass ? "pass" : "fail").set("error", c.error);
    if (!c.pass) ++out.failures;
    out.rows.push_back(std::move(r));
  }
  return out;
}

}  // namespace flatsim::tools
