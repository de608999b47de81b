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

#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "flatsim/sim.hpp"
#include "flatsim_tools/runner.hpp"

namespace flatsim::tools {

namespace {

struct Shape {
  AttentionWorkload w;
  std::string tag;
};

std::vector<Shape> attention_shapes(const ValidateSettings& caps) {
  const std::uint32_t S = caps.max_seq;
  const std::uint32_t D = caps.max_head_dim;
  const std::uint32_t Dh = std::max(1u, D / 2);
  std::vector<Shape> out;
  auto add = [&](AttentionWorkload w, std::string tag) { out.push_back({w, std::move(tag)}); };

  for (std::uint32_t s : {1u, std::max(1u, S / 2 + 5), S}) {
    for (std::uint32_t d : {Dh, D}) {
      for (bool causal : {false, true}) {
        AttentionWorkload w;
        w.batch = 1;
        w.heads = 2;
        w.seq_q = w.seq_kv = s;
        w.head_dim = d;
        w.causal = causal;
        add(w, fmt::format("mha_prefill S={} D={}{}", s, d, causal ? " causal" : ""));
      }
    }
  }
  {
    AttentionWorkload w;
    w.variant = AttentionVariant::kMhaDecode;
    w.batch = 2;
    w.heads = 4;
    w.seq_q = 1;
    w.seq_kv = S;
    w.head_dim = D;
    add(w, fmt::format("mha_decode S={} D={}", S, D));
    w.seq_kv = 1;
    add(w, fmt::format("mha_decode S=1 D={}", D));
  }
  {
    AttentionWorkload w;
    w.variant = AttentionVariant::kMhaSpecDecode;
    w.batch = 2;
    w.heads = 4;
    w.seq_q = w.spec_len = 2;
    w.seq_kv = std::max(2u, S - 3);
    w.head_dim = D;
    w.causal = true;
    add(w, fmt::format("mha_spec_decode S={} D={}", w.seq_kv, D));
  }
  {
    AttentionWorkload w;
    w.variant = AttentionVariant::kGqaDecode;
    w.batch = 2;
    w.heads = 8;
    w.group_size = 4;
    w.seq_q = 1;
    w.seq_kv = S;
    w.head_dim = D;
    add(w, fmt::format("gqa_decode G=4 S={} D={}", S, D));
    w.seq_q = w.spec_len = 2;
    w.causal = true;
    add(w, fmt::format("gqa_decode G=4 spec=2 S={} D={}", S, D));
  }
  {
    AttentionWorkload w;
    w.variant = AttentionVariant::kMlaDecodeAbsorbed;
    w.batch = 2;
    w.heads = 4;
    w.seq_q = w.spec_len = 2;
    w.seq_kv = S;
    w.head_dim = Dh;
    w.latent_rank = D;
    w.rope_dim = std::max(1u, Dh / 2);
    w.causal = true;
    add(w, fmt::format("mla_decode S={} dc={} rope={}", S, D, w.rope_dim));
  }
  return out;
}

double run_attention_case(const AttentionWorkload& w, const ArchConfig& arch, Dataflow d,
                          std::uint32_t g, std::uint32_t slice, std::uint64_t seed,
                          const ScheduleMutator& mutate, bool& schedule_ok, std::string& err) {
  Schedule s;
  if (is_flat(d)) {
    const FlatParams p = make_flat_params(d, g, g, slice, slice);
    s = w.variant == AttentionVariant::kMhaPrefill ? gen_flatattention(w, arch, p)
                                                   : gen_flat_decode(w, arch, p);
  } else {
    s = gen_flashattention(w, arch, d == Dataflow::kFa3 ? FlashVariant::kFa3 : FlashVariant::kFa2,
                           slice);
  }
  if (mutate) mutate(s);
  const ValidationResult chk = check_schedule(s, arch);
  schedule_ok = chk.ok();
  if (!schedule_ok) err = chk.violations.front();
  const AttentionTensors t = random_tensors(w, seed);
  const std::vector<Matrix> ref = reference_attention(w, t);
  FunctionalMemory mem = bind_attention(w, t, s);
  simulate(s, arch, SimMode::kFunctional, &mem);
  const std::vector<Matrix> out = extract_attention(w, t, s, mem);
  double worst = 0;
  for (std::size_t i = 0; i < out.size(); ++i)
    worst = std::max(worst, max_relative_error(out[i], ref[i]));
  return worst;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

std::uint32_t find_tensor(const Schedule& s, const std::string& name) {
  const auto ts = s.tensors();
  for (std::uint32_t i = 0; i < ts.size(); ++i)
    if (ts[i].name == name) return i;
  throw ContractViolation("schedule lacks tensor " + name);
}

double run_summa_case(std::uint32_t m, std::uint32_t n, std::uint32_t k, const ArchConfig& arch,
                      const SummaBlock& block, std::uint64_t seed, const ScheduleMutator& mutate,
                      bool& schedule_ok, std::string& err) {
  Schedule s = gen_summa(m, n, k, arch, block);
  if (mutate) mutate(s);
  const ValidationResult chk = check_schedule(s, arch);
  schedule_ok = chk.ok();
  if (!schedule_ok) err = chk.violations.front();
  std::mt19937_64 rng(seed);
  const Matrix a = random_matrix(m, k, rng);
  const Matrix b = random_matrix(k, n, rng);
  FunctionalMemory mem;
  for (const auto& t : s.tensors()) mem.tensors.emplace_back(t.rows, t.cols);
  mem.tensors[find_tensor(s, block.prefix + "A")] = a;
  mem.tensors[find_tensor(s, block.prefix + "B")] = b;
  simulate(s, arch, SimMode::kFunctional, &mem);
  return max_relative_error(mem.tensors[find_tensor(s, block.prefix + "C")], reference_gemm(a, b));
}

}  // namespace

std::vector<FunctionalCase> validate_functional(const ValidateSettings& caps,
                                                const ArchConfig& base,
                                                const ScheduleMutator& mutate) {
  ArchConfig arch = base;
  const std::uint32_t mesh = std::max(2u, caps.max_group);
  arch.noc.mesh_x = arch.noc.mesh_y = mesh;
  arch.tile.l1_capacity = std::max<Bytes>(arch.tile.l1_capacity, 384 * 1024);

  std::vector<FunctionalCase> out;
  auto record = [&](std::string name, auto&& fn) {
    FunctionalCase c;
    c.name = std::move(name);
    try {
      c.max_rel_error = fn(c.schedule_ok, c.error);
      c.pass = c.schedule_ok && c.max_rel_error <= caps.tolerance;
      if (c.schedule_ok && !c.pass)
        c.error = fmt::format("relative error {:.3e} above {:.1e}", c.max_rel_error,
                              caps.tolerance);
    } catch (const std::exception& ex) {
      c.pass = false;
      c.error = ex.what();
    }
    out.push_back(std::move(c));
  };

  std::vector<std::uint32_t> groups;
  for (std::uint32_t g = 1; g <= caps.max_group; g *= 2) groups.push_back(g);
  const std::uint32_t slice = 16;

  std::uint64_t seed = caps.seed;
  for (const Shape& sh : attention_shapes(caps)) {
    for (Dataflow d : all_dataflows()) {
      const std::vector<std::uint32_t> gs = is_flat(d) ? groups : std::vector<std::uint32_t>{1};
      for (std::uint32_t g : gs) {
        const std::uint64_t case_seed = seed++;
        const std::string name =
            is_flat(d) ? fmt::format("{} {} {}x{}", sh.tag, to_string(d), g, g)
                       : fmt::format("{} {} M={}", sh.tag, to_string(d), slice);
        record(name, [&](bool& ok, std::string& err) {
          return run_attention_case(sh.w, arch, d, g, slice, case_seed, mutate, ok, err);
        });
      }
    }
  }

  const std::uint32_t S = caps.max_seq;
  const std::uint32_t D = caps.max_head_dim;
  struct SummaShape {
    std::uint32_t m, n, k;
    SummaBlock block;
  };
  std::vector<SummaShape> summa{{S, S, D, {}}, {S / 2 + 3, D + 5, S - 1, {}}, {1, 1, 1, {}}};
  SummaBlock sub;
  sub.bm = 16;
  sub.bn = 16;
  sub.bk = 16;
  sub.extent_x = std::max(1u, mesh / 2);
  sub.extent_y = std::max(1u, mesh / 2);
  sub.origin = {mesh - sub.extent_x, mesh - sub.extent_y};
  sub.prefix = "sub.";
  summa.push_back({D + 7, S, D, sub});
  for (const auto& sh : summa) {
    const std::uint64_t case_seed = seed++;
    const std::string name = fmt::format("summa {}x{}x{}{}", sh.m, sh.n, sh.k,
                                         sh.block.prefix.empty() ? "" : " submesh");
    record(name, [&](bool& ok, std::string& err) {
      return run_summa_case(sh.m, sh.n, sh.k, arch, sh.block, case_seed, mutate, ok, err);
    });
  }
  return out;
}

}  // namespace flatsim::tools
