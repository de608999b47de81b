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

#include "flatsim/wafer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "flatsim/dataflows.hpp"
#include "flatsim/engines.hpp"
#include "flatsim/noc.hpp"
#include "flatsim/sim.hpp"
#include "flatsim/tiling.hpp"

namespace flatsim {

namespace {

std::uint32_t round_up(std::uint32_t v, std::uint32_t m) { return (v + m - 1) / m * m; }

double run(const Schedule& s, const ArchConfig& chip) {
  return static_cast<double>(simulate(s, chip, SimMode::kTiming).total_cycles);
}

}  // namespace

std::vector<std::string> validate(const WaferConfig& w) {
  std::vector<std::string> v;
  if (w.chips_x < 1 || w.chips_y < 1) v.emplace_back("chips >= 1");
  if (!(w.d2d_bandwidth >= 1e9)) v.emplace_back("d2d_bandwidth >= 1 GB/s");
  if (!(w.d2d_latency >= 0)) v.emplace_back("d2d_latency >= 0");
  for (auto& s : validate(w.chip).violations) v.push_back("chip: " + s);
  return v;
}

std::vector<std::string> validate(const ParallelismPlan& p, const WaferConfig& w) {
  std::vector<std::string> v;
  if (p.ep_degree < 1 || p.pp_degree < 1) v.emplace_back("ep_degree, pp_degree >= 1");
  if (static_cast<std::uint64_t>(p.ep_degree) * p.pp_degree > w.chips())
    v.emplace_back("ep_degree * pp_degree <= chips");
  if (p.ep_degree > w.chips_x && p.ep_degree % w.chips_x != 0)
    v.emplace_back("ep_degree fits a rectangle of whole chip rows");
  if (!(p.acceptance_rate >= 0 && p.acceptance_rate <= 1)) v.emplace_back("acceptance in [0,1]");
  if (p.layers < 1) v.emplace_back("layers >= 1");
  if (p.spec_len < 1) v.emplace_back("spec_len >= 1");
  if (p.kv_len < 1) v.emplace_back("kv_len >= 1");
  return v;
}

double DecoderLayerSpec::weight_bytes(std::uint32_t experts, std::uint32_t dtype) const {
  const double d = d_model;
  double params = d * q_rank + static_cast<double>(q_rank) * heads * (head_dim + rope_dim) +
                  d * (kv_rank + rope_dim) + 2.0 * kv_rank * heads * head_dim +
                  static_cast<double>(heads) * head_dim * d + d * routed_experts;
  params += (shared_experts + static_cast<double>(experts)) * 3.0 * d * expert_inter;
  return params * dtype;
}

const char* to_string(AttentionDataflow d) {
  return d == AttentionDataflow::kFlatAttention ? "flat" : "flashmla_like";
}

AttentionDataflow attention_dataflow_from_string(const std::string& s) {
  if (s == "flat") return AttentionDataflow::kFlatAttention;
  if (s == "flashmla_like") return AttentionDataflow::kFlashMlaLike;
  throw std::invalid_argument("unknown attention dataflow '" + s + "'");
}

double WaferModel::gemm_cycles(const ArchConfig& chip, std::uint32_t m, std::uint32_t n,
                               std::uint32_t k) {
  if (m == 0) return 0;
  const std::string key = fmt::format("gemm {} {} {}", m, n, k);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  return cache_[key] = run(gen_summa(m, n, k, chip), chip);
}

double WaferModel::attention_cycles(const ArchConfig& chip, const ParallelismPlan& plan,
                                    AttentionDataflow dataflow) {
  if (plan.batch_per_chip == 0) return 0;
  const std::string key =
      fmt::format("attn {} {} {} {}", to_string(dataflow), plan.batch_per_chip, plan.spec_len,
                  plan.kv_len);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  AttentionWorkload w;
  w.variant = AttentionVariant::kMlaDecodeAbsorbed;
  w.batch = plan.batch_per_chip;
  w.heads = spec_.heads;
  w.seq_q = plan.spec_len;
  w.spec_len = plan.spec_len;
  w.seq_kv = plan.kv_len;
  w.head_dim = spec_.head_dim;
  w.latent_rank = spec_.kv_rank;
  w.rope_dim = spec_.rope_dim;
  w.causal = plan.spec_len > 1;
  w.dtype_bytes = chip.dtype_bytes;
  Schedule s;
  if (dataflow == AttentionDataflow::kFlatAttention) {
    const TilingChoice t = select_tiling(w, chip, true);
    s = gen_flatattention(
        w, chip, make_flat_params(Dataflow::kFlatAsync, t.gx, t.gy, t.slice_r, t.slice_c));
  } else {
    s = gen_flashattention(w, chip, FlashVariant::kFa3, 64);
  }
  return cache_[key] = run(s, chip);
}

double WaferModel::elementwise_cycles(const ArchConfig& chip, std::uint64_t elements,
                                      double flops, double bytes) {
  if (elements == 0) return 0;
  const auto peaks = derive_peaks(chip);
  const double lanes = static_cast<double>(chip.tile.vector_flop_per_cycle) * chip.noc.tiles();
  const double compute = std::ceil(static_cast<double>(elements) * flops / lanes);
  const double memory = std::ceil(bytes / static_cast<double>(peaks.hbm_bytes_per_cycle));
  return std::max(compute, memory) + static_cast<double>(chip.hbm.access_latency) +
         static_cast<double>(chip.noc.sync_barrier_cost);
}

std::vector<std::uint32_t> WaferModel::routed_tokens(const ParallelismPlan& plan) const {
  const std::uint32_t experts = spec_.routed_experts;
  const std::uint32_t per_chip = (experts + plan.ep_degree - 1) / plan.ep_degree;
  std::vector<std::uint32_t> counts(experts, 0);
  std::mt19937_64 rng(plan.routing_seed);
  std::vector<std::uint32_t> pool(experts);
  const std::uint64_t tokens = static_cast<std::uint64_t>(plan.tokens()) * plan.ep_degree;
  const std::uint32_t k = std::min(spec_.top_k, experts);
  for (std::uint64_t t = 0; t < tokens; ++t) {
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::uint32_t i = 0; i < k; ++i) {
      const std::uint32_t j = i + static_cast<std::uint32_t>(rng() % (experts - i));
      std::swap(pool[i], pool[j]);
      ++counts[pool[i]];
    }
  }
  // The slowest chip sets the pace under barrier-separated execution.
  std::vector<std::uint32_t> best;
  std::uint64_t best_total = 0;
  for (std::uint32_t c = 0; c * per_chip < experts; ++c) {
    std::vector<std::uint32_t> mine;
    std::uint64_t total = 0;
    for (std::uint32_t e = c * per_chip; e < std::min(experts, (c + 1) * per_chip); ++e) {
      if (counts[e] > 0) mine.push_back(counts[e]);
      total += counts[e];
    }
    if (best.empty() || total > best_total) {
      best = std::move(mine);
      best_total = total;
    }
  }
  std::sort(best.begin(), best.end(), std::greater<>());
  return best;
}

double WaferModel::experts_cycles(const ArchConfig& chip,
                                  const std::vector<std::uint32_t>& tokens) {
  if (tokens.empty()) return 0;
  const std::uint32_t band_limit = std::min<std::uint32_t>(8, chip.noc.mesh_y);
  const std::uint32_t d = spec_.d_model, inter = spec_.expert_inter;
  double total = 0;
  for (std::size_t w0 = 0; w0 < tokens.size(); w0 += band_limit) {
    const std::size_t n = std::min<std::size_t>(band_limit, tokens.size() - w0);
    std::string key = "experts";
    for (std::size_t i = 0; i < n; ++i) key += fmt::format(" {}", round_up(tokens[w0 + i], 32));
    if (auto it = cache_.find(key); it != cache_.end()) {
      total += it->second;
      continue;
    }
    const std::uint32_t band = chip.noc.mesh_y / static_cast<std::uint32_t>(n);
    Schedule up(chip.noc.mesh_x, chip.noc.mesh_y, chip.dtype_bytes);
    Schedule down(chip.noc.mesh_x, chip.noc.mesh_y, chip.dtype_bytes);
    std::uint64_t act = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t m = round_up(tokens[w0 + i], 32);
      SummaBlock blk;
      blk.origin = {0, static_cast<std::uint32_t>(i) * band};
      blk.extent_x = chip.noc.mesh_x;
      blk.extent_y = band;
      blk.prefix = fmt::format("e{}u.", i);
      up.append(gen_summa(m, 2 * inter, d, chip, blk));
      blk.prefix = fmt::format("e{}d.", i);
      down.append(gen_summa(m, d, inter, chip, blk));
      act += static_cast<std::uint64_t>(m) * inter;
    }
    const double act_cycles =
        elementwise_cycles(chip, act, 4.0, 3.0 * static_cast<double>(act) * chip.dtype_bytes);
    const double cycles = run(up, chip) + act_cycles + run(down, chip);
    cache_[key] = cycles;
    total += cycles;
  }
  return total;
}

std::vector<KernelTime> WaferModel::layer_time(const ArchConfig& chip,
                                               const ParallelismPlan& plan,
                                               AttentionDataflow dataflow) {
  const auto& s = spec_;
  const std::uint32_t T = plan.tokens();
  const double dt = chip.dtype_bytes;
  const double f = chip.frequency_hz;
  const std::uint64_t td = static_cast<std::uint64_t>(T) * s.d_model;
  std::vector<KernelTime> k;
  auto add = [&](std::string name, double cycles, bool attention = false) {
    k.push_back({std::move(name), cycles / f, attention, false});
  };
  auto norm = [&] { return elementwise_cycles(chip, td, 3.0, 2.0 * td * dt); };

  add("rmsnorm_attn", norm());
  add("q_down", gemm_cycles(chip, T, s.q_rank, s.d_model));
  add("q_up", gemm_cycles(chip, T, s.heads * (s.head_dim + s.rope_dim), s.q_rank));
  add("q_absorb", gemm_cycles(chip, T, s.heads * s.kv_rank, s.head_dim));
  add("kv_down", gemm_cycles(chip, T, s.kv_rank + s.rope_dim, s.d_model));
  {
    const std::uint64_t rope = static_cast<std::uint64_t>(T) * (s.heads + 1) * s.rope_dim;
    const double cache_write = static_cast<double>(T) * (s.kv_rank + s.rope_dim) * dt;
    add("rope_cache_write", elementwise_cycles(chip, rope, 4.0, 2.0 * rope * dt + cache_write));
  }
  add("attention", attention_cycles(chip, plan, dataflow), true);
  add("v_up", gemm_cycles(chip, T, s.heads * s.head_dim, s.kv_rank));
  add("o_proj", gemm_cycles(chip, T, s.d_model, s.heads * s.head_dim));
  add("residual_attn", elementwise_cycles(chip, td, 1.0, 3.0 * td * dt));
  add("rmsnorm_ffn", norm());
  {
    const std::uint64_t scores = static_cast<std::uint64_t>(T) * s.routed_experts;
    add("moe_gate", gemm_cycles(chip, T, s.routed_experts, s.d_model) +
                        elementwise_cycles(chip, scores, 2.0, 2.0 * scores * dt));
  }
  k.push_back({"dispatch", 0, false, true});
  {
    const std::uint64_t act = static_cast<std::uint64_t>(T) * s.expert_inter * s.shared_experts;
    double c = 0;
    if (s.shared_experts > 0 && T > 0) {
      c = gemm_cycles(chip, T, 2 * s.expert_inter * s.shared_experts, s.d_model) +
          elementwise_cycles(chip, act, 4.0, 3.0 * act * dt) +
          gemm_cycles(chip, T, s.d_model, s.expert_inter * s.shared_experts);
    }
    add("shared_expert", c);
  }
  add("routed_experts", T > 0 ? experts_cycles(chip, routed_tokens(plan)) : 0.0);
  k.push_back({"combine", 0, false, true});
  add("residual_ffn", elementwise_cycles(chip, td, 1.0, 3.0 * td * dt));
  return k;
}

double WaferModel::c2c_time(const ParallelismPlan& plan, const WaferConfig& wafer) {
  if (plan.ep_degree <= 1 || plan.tokens() == 0) return 0;
  const std::uint32_t ex = std::min(wafer.chips_x, plan.ep_degree);
  const std::uint32_t ey = (plan.ep_degree + ex - 1) / ex;
  if (ey > wafer.chips_y) throw ContractViolation("EP group does not fit the chip mesh");
  const std::string key = fmt::format("c2c {} {} {} {} {}", plan.ep_degree, plan.tokens(),
                                      wafer.d2d_bandwidth, wafer.d2d_latency,
                                      wafer.chip.dtype_bytes);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  // Chip-granularity mesh with 1 ns cycles.
  const auto bw = static_cast<std::uint32_t>(std::max(1.0, wafer.d2d_bandwidth * 1e-9));
  const auto hop = static_cast<Cycles>(std::llround(wafer.d2d_latency * 1e9));
  const MeshTopology topo(ex, ey);
  LinkTimeline links(topo.num_links(), bw, std::max<Cycles>(hop, 1));
  const double msg = static_cast<double>(plan.tokens()) * spec_.d_model *
                     wafer.chip.dtype_bytes * spec_.top_k / plan.ep_degree;
  const auto bytes = static_cast<Bytes>(std::ceil(msg));
  Cycles done = 0;
  const std::uint32_t n = plan.ep_degree;
  for (std::uint32_t d = 1; d < n; ++d) {
    for (std::uint32_t src = 0; src < n; ++src) {
      const std::uint32_t dst = (src + d) % n;
      const auto path = topo.route_ids(topo.coord(src), topo.coord(dst));
      done = std::max(done, links.schedule_transfer(path, 0, bytes));
    }
  }
  return cache_[key] = static_cast<double>(done) * 1e-9;
}

ServingReport WaferModel::serve(const ParallelismPlan& plan, const WaferConfig& wafer,
                                AttentionDataflow dataflow) {
  if (auto errs = validate(wafer); !errs.empty())
    throw ContractViolation("invalid wafer: " + errs.front());
  if (auto errs = validate(plan, wafer); !errs.empty())
    throw ContractViolation("invalid plan: " + errs.front());
  const ArchConfig& chip = wafer.chip;
  const std::uint32_t per_stage = (plan.layers + plan.pp_degree - 1) / plan.pp_degree;
  const std::uint32_t experts = (spec_.routed_experts + plan.ep_degree - 1) / plan.ep_degree;
  const double kv_bytes = static_cast<double>(plan.batch_per_chip) * plan.kv_len *
                          (spec_.kv_rank + spec_.rope_dim) * chip.dtype_bytes;
  const double need = per_stage * (spec_.weight_bytes(experts, chip.dtype_bytes) + kv_bytes);
  if (need > static_cast<double>(chip.hbm.capacity)) {
    throw SimError(fmt::format("HBM capacity exceeded: {:.1f} GiB required, {:.1f} GiB available",
                               need / (1ull << 30),
                               static_cast<double>(chip.hbm.capacity) / (1ull << 30)));
  }

  ServingReport r;
  r.layer = layer_time(chip, plan, dataflow);
  const double a2a = c2c_time(plan, wafer);
  double attention = 0, c2c_layer = 0;
  for (auto& kt : r.layer) {
    if (kt.c2c) {
      kt.seconds = a2a;
      c2c_layer += a2a;
    }
    if (kt.attention) attention += kt.seconds;
    r.layer_seconds += kt.seconds;
  }
  double pp_xfer = 0;
  if (plan.pp_degree > 1 && plan.tokens() > 0) {
    const std::uint32_t ex = std::min(wafer.chips_x, plan.ep_degree);
    const std::uint32_t hops = (plan.ep_degree + ex - 1) / ex;
    pp_xfer = static_cast<double>(plan.tokens()) * spec_.d_model * chip.dtype_bytes /
                  wafer.d2d_bandwidth +
              hops * wafer.d2d_latency;
  }
  const double stage = per_stage * r.layer_seconds + pp_xfer;
  r.t_iter = plan.pp_degree * stage;
  r.tpot_ms = r.t_iter / plan.tokens_per_step() * 1e3;
  if (r.t_iter > 0) {
    r.per_chip_throughput = plan.batch_per_chip * plan.tokens_per_step() / r.t_iter;
    r.c2c_fraction = plan.pp_degree * (per_stage * c2c_layer + pp_xfer) / r.t_iter;
  }
  r.system_throughput = r.per_chip_throughput * wafer.chips();
  if (r.layer_seconds > 0) r.attention_fraction = attention / r.layer_seconds;
  return r;
}

}  // namespace flatsim
