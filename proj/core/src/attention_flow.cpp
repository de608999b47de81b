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

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "flatsim/dataflows.hpp"

namespace flatsim {

namespace {

std::uint32_t tensor_id(const Schedule& s, const std::string& name) {
  const auto ts = s.tensors();
  for (std::uint32_t i = 0; i < ts.size(); ++i)
    if (ts[i].name == name) return i;
  return ~0u;
}

void set_rows(Matrix& dst, std::size_t row0, const Matrix& src, std::size_t src_row,
              double scale) {
  for (std::size_t c = 0; c < src.cols() && c < dst.cols(); ++c)
    dst(row0, c) = src(src_row, c) * scale;
}

}  // namespace

const char* to_string(Dataflow d) {
  switch (d) {
    case Dataflow::kFa2: return "fa2";
    case Dataflow::kFa3: return "fa3";
    case Dataflow::kFlatSc: return "flat_sc";
    case Dataflow::kFlatTc: return "flat_tc";
    case Dataflow::kFlatHc: return "flat_hc";
    case Dataflow::kFlatAsync: return "flat_async";
  }
  return "?";
}

Dataflow dataflow_from_string(const std::string& s) {
  for (Dataflow d : all_dataflows())
    if (s == to_string(d)) return d;
  throw std::invalid_argument("unknown dataflow '" + s + "'");
}

bool is_flat(Dataflow d) { return d != Dataflow::kFa2 && d != Dataflow::kFa3; }

const std::vector<Dataflow>& all_dataflows() {
  static const std::vector<Dataflow> all{Dataflow::kFa2,    Dataflow::kFa3,
                                         Dataflow::kFlatSc, Dataflow::kFlatTc,
                                         Dataflow::kFlatHc, Dataflow::kFlatAsync};
  return all;
}

EffectiveAttention effective_attention(const AttentionWorkload& w) {
  if (auto errs = validate(w); !errs.empty())
    throw ContractViolation("invalid workload: " + errs.front());
  EffectiveAttention e;
  e.kv_len = w.seq_kv;
  e.q_period = w.seq_q;
  e.causal = w.causal;
  e.causal_offset = static_cast<std::int64_t>(w.seq_kv) - static_cast<std::int64_t>(w.seq_q);
  e.dtype_bytes = w.dtype_bytes;
  switch (w.variant) {
    case AttentionVariant::kGqaDecode:
      e.instances = w.batch * kv_heads(w);
      e.rows = w.group_size * w.seq_q;
      e.d_qk = e.d_v = w.head_dim;
      break;
    case AttentionVariant::kMlaDecodeAbsorbed:
      e.instances = w.batch;
      e.rows = w.heads * w.seq_q;
      e.d_qk = w.latent_rank + w.rope_dim;
      e.d_v = w.latent_rank;
      e.v_from_k = true;
      break;
    default:
      e.instances = w.batch * w.heads;
      e.rows = w.seq_q;
      e.d_qk = e.d_v = w.head_dim;
      break;
  }
  return e;
}

std::vector<std::string> validate(const FlatParams& p, const ArchConfig& arch) {
  std::vector<std::string> v;
  if (p.gx < 1 || p.gy < 1) v.emplace_back("group extents >= 1");
  if (p.gx > arch.noc.mesh_x || p.gy > arch.noc.mesh_y)
    v.push_back(fmt::format("group {}x{} exceeds mesh {}x{}", p.gx, p.gy, arch.noc.mesh_x,
                            arch.noc.mesh_y));
  if (p.gy > 0 && (p.block_r == 0 || p.block_r % p.gy != 0)) v.emplace_back("gy divides block_r");
  if (p.gx > 0 && (p.block_c == 0 || p.block_c % p.gx != 0)) v.emplace_back("gx divides block_c");
  if (p.strategy == CollectiveStrategy::kHw && !arch.noc.hw_collectives_enabled &&
      (p.gx > 1 || p.gy > 1))
    v.emplace_back("HW collectives disabled on this NoC");
  return v;
}

FlatParams make_flat_params(Dataflow d, std::uint32_t gx, std::uint32_t gy,
                            std::uint32_t slice_r, std::uint32_t slice_c) {
  FlatParams p;
  p.gx = gx;
  p.gy = gy;
  p.block_r = gy * slice_r;
  p.block_c = gx * slice_c;
  switch (d) {
    case Dataflow::kFlatSc: p.strategy = CollectiveStrategy::kSwSeq; break;
    case Dataflow::kFlatTc: p.strategy = CollectiveStrategy::kSwTree; break;
    case Dataflow::kFlatHc: p.strategy = CollectiveStrategy::kHw; break;
    case Dataflow::kFlatAsync:
      p.strategy = CollectiveStrategy::kHw;
      p.async = true;
      break;
    default:
      throw ContractViolation(std::string("not a flat dataflow: ") + to_string(d));
  }
  return p;
}

Schedule gen_flat_decode(const AttentionWorkload& w, const ArchConfig& arch,
                         const FlatParams& params) {
  if (w.variant == AttentionVariant::kMhaPrefill)
    throw ContractViolation("gen_flat_decode: prefill workload");
  return gen_flatattention(w, arch, params);
}

FunctionalMemory bind_attention(const AttentionWorkload& w, const AttentionTensors& t,
                                const Schedule& schedule) {
  const EffectiveAttention e = effective_attention(w);
  FunctionalMemory mem;
  const auto descs = schedule.tensors();
  mem.tensors.resize(descs.size());
  for (std::size_t i = 0; i < descs.size(); ++i)
    mem.tensors[i] = Matrix(descs[i].rows, descs[i].cols);
  const std::uint32_t qi = tensor_id(schedule, "Q");
  const std::uint32_t ki = tensor_id(schedule, "K");
  const std::uint32_t vi = tensor_id(schedule, "V");
  if (qi == ~0u || ki == ~0u) throw ContractViolation("bind_attention: schedule lacks Q/K");
  Matrix& Q = mem.tensors[qi];
  Matrix& K = mem.tensors[ki];
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.head_dim));

  if (w.variant == AttentionVariant::kMlaDecodeAbsorbed) {
    std::vector<Matrix> absorbed;
    for (std::uint32_t h = 0; h < w.heads; ++h)
      absorbed.push_back(absorb_mla_weights(t.w_uq[h], t.w_uk[h]));
    for (std::uint32_t b = 0; b < w.batch; ++b) {
      for (std::uint32_t h = 0; h < w.heads; ++h) {
        const Matrix qh = reference_gemm(t.c_q[b], absorbed[h]);
        for (std::uint32_t s = 0; s < w.seq_q; ++s)
          set_rows(Q, static_cast<std::size_t>(b) * e.rows + h * w.seq_q + s, qh, s, scale);
      }
      for (std::uint32_t s = 0; s < w.seq_kv; ++s)
        set_rows(K, static_cast<std::size_t>(b) * e.kv_len + s, t.c_kv[b], s, 1.0);
    }
    return mem;
  }

  if (vi == ~0u) throw ContractViolation("bind_attention: schedule lacks V");
  Matrix& V = mem.tensors[vi];
  const std::uint32_t kvh = kv_heads(w);
  const std::uint32_t per_kv = w.heads / kvh;
  for (std::uint32_t b = 0; b < w.batch; ++b) {
    for (std::uint32_t h = 0; h < w.heads; ++h) {
      const std::uint32_t inst = b * kvh + h / per_kv;
      const std::uint32_t g = h % per_kv;
      for (std::uint32_t s = 0; s < w.seq_q; ++s) {
        const std::size_t row = static_cast<std::size_t>(inst) * e.rows + g * w.seq_q + s;
        set_rows(Q, row, t.q[b * w.heads + h], s, scale);
      }
    }
    for (std::uint32_t g = 0; g < kvh; ++g) {
      for (std::uint32_t s = 0; s < w.seq_kv; ++s) {
        const std::size_t row = static_cast<std::size_t>(b * kvh + g) * e.kv_len + s;
        set_rows(K, row, t.k[b * kvh + g], s, 1.0);
        set_rows(V, row, t.v[b * kvh + g], s, 1.0);
      }
    }
  }
  return mem;
}

std::vector<Matrix> extract_attention(const AttentionWorkload& w, const AttentionTensors& t,
                                      const Schedule& schedule, const FunctionalMemory& mem) {
  const EffectiveAttention e = effective_attention(w);
  const std::uint32_t oi = tensor_id(schedule, "O");
  if (oi == ~0u || oi >= mem.tensors.size())
    throw ContractViolation("extract_attention: no output tensor");
  const Matrix& O = mem.tensors[oi];
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(w.batch) * w.heads);
  const std::uint32_t kvh = kv_heads(w);
  const std::uint32_t per_kv = w.heads / kvh;
  for (std::uint32_t b = 0; b < w.batch; ++b) {
    for (std::uint32_t h = 0; h < w.heads; ++h) {
      Matrix head(w.seq_q, e.d_v);
      for (std::uint32_t s = 0; s < w.seq_q; ++s) {
        const std::size_t row =
            w.variant == AttentionVariant::kMlaDecodeAbsorbed
                ? static_cast<std::size_t>(b) * e.rows + h * w.seq_q + s
                : static_cast<std::size_t>(b * kvh + h / per_kv) * e.rows +
                      (h % per_kv) * w.seq_q + s;
        for (std::uint32_t c = 0; c < e.d_v; ++c) head(s, c) = O(row, c);
      }
      if (w.variant == AttentionVariant::kMlaDecodeAbsorbed)
        out.push_back(reference_gemm(head, t.w_uv[h]));
      else
        out.push_back(std::move(head));
    }
  }
  return out;
}

}  // namespace flatsim
