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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flatsim/arch.hpp"
#include "flatsim/noc.hpp"
#include "flatsim/numerics.hpp"
#include "flatsim/schedule.hpp"
#include "flatsim/sim.hpp"

namespace flatsim {

/// HBM traffic of an attention dataflow.
struct IoModel {
  std::uint64_t elements_total = 0;
  Bytes bytes_total = 0;
  bool operator==(const IoModel&) const = default;
};

/// 2 B H D S (1 + S/M): Q and O once, K and V once per row block of M.
/// S is padded up to a multiple of M.
IoModel io_flash(std::uint64_t B, std::uint64_t H, std::uint64_t D, std::uint64_t S,
                 std::uint64_t M, std::uint32_t dtype_bytes = 2);

/// 2 B H D S (1 + S/(N M)); N M is clamped to S.
IoModel io_flat(std::uint64_t B, std::uint64_t H, std::uint64_t D, std::uint64_t S,
                std::uint64_t M, std::uint64_t N, std::uint32_t dtype_bytes = 2);

enum class Dataflow { kFa2, kFa3, kFlatSc, kFlatTc, kFlatHc, kFlatAsync };

const char* to_string(Dataflow d);
Dataflow dataflow_from_string(const std::string& s);
bool is_flat(Dataflow d);
/// The six prefill dataflows in report order.
const std::vector<Dataflow>& all_dataflows();

/// The attention problem a workload reduces to: `instances` independent
/// (rows x kv_len) attentions with d_qk-wide scores and d_v-wide values.
/// GQA stacks the heads of one KV group as rows, MLA stacks every head over
/// the shared latent cache and reads V from the first d_v columns of K.
struct EffectiveAttention {
  std::uint32_t instances = 1;
  std::uint32_t rows = 1;
  std::uint32_t kv_len = 1;
  std::uint32_t d_qk = 1;
  std::uint32_t d_v = 1;
  std::uint32_t q_period = 1;      // rows per original head
  std::int64_t causal_offset = 0;
  bool causal = false;
  bool v_from_k = false;
  std::uint32_t dtype_bytes = 2;
};

EffectiveAttention effective_attention(const AttentionWorkload& w);

struct FlatParams {
  std::uint32_t gx = 1, gy = 1;            // group shape
  std::uint32_t block_r = 128, block_c = 128;  // group block sizes
  CollectiveStrategy strategy = CollectiveStrategy::kHw;
  bool async = false;

  std::uint32_t slice_r() const { return block_r / gy; }
  std::uint32_t slice_c() const { return block_c / gx; }
};

std::vector<std::string> validate(const FlatParams& p, const ArchConfig& arch);

/// Per-variant defaults: SC/TC/HC differ only in collective strategy, Async
/// adds the counterphase second buffer set on top of HW collectives.
FlatParams make_flat_params(Dataflow d, std::uint32_t gx, std::uint32_t gy,
                            std::uint32_t slice_r, std::uint32_t slice_c);

enum class FlashVariant { kFa2, kFa3 };

/// Embarrassingly parallel mapping of (instance, row block) items onto tiles.
Schedule gen_flashattention(const AttentionWorkload& w, const ArchConfig& arch,
                            FlashVariant variant, std::uint32_t M);

/// Group-cooperative attention with row/column collectives.
Schedule gen_flatattention(const AttentionWorkload& w, const ArchConfig& arch,
                           const FlatParams& params);

/// Decode variants through their effective attention; rejects prefill.
Schedule gen_flat_decode(const AttentionWorkload& w, const ArchConfig& arch,
                         const FlatParams& params);

struct SummaBlock {
  std::uint32_t bm = 0, bn = 0;  // 0: derived from the operand shape
  std::uint32_t bk = 128;
  // Sub-mesh running the GEMM; extent 0 means the whole mesh.
  TileCoord origin;
  std::uint32_t extent_x = 0, extent_y = 0;
  std::string prefix;  // buffer/tensor name prefix, for merging schedules
};

/// C (m x n) = A (m x k) B (k x n) with stationary output blocks. Tensors
/// are named <prefix>A, <prefix>B, <prefix>C.
Schedule gen_summa(std::uint32_t m, std::uint32_t n, std::uint32_t k, const ArchConfig& arch,
                   const SummaBlock& block = {});

/// HBM contents for an attention schedule, with the 1/sqrt(D) score scale
/// folded into Q (and, for MLA, the absorbed key projection).
FunctionalMemory bind_attention(const AttentionWorkload& w, const AttentionTensors& t,
                                const Schedule& schedule);

/// Outputs indexed like reference_attention. MLA applies W_UV to the latent
/// result.
std::vector<Matrix> extract_attention(const AttentionWorkload& w, const AttentionTensors& t,
                                      const Schedule& schedule, const FunctionalMemory& mem);

}  // namespace flatsim
