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
#include <map>
#include <string>
#include <vector>

#include "flatsim/arch.hpp"

namespace flatsim {

struct WaferConfig {
  std::uint32_t chips_x = 8, chips_y = 8;
  double d2d_bandwidth = 1e12;  // bytes/s per directed link
  double d2d_latency = 256e-9;  // seconds per hop
  ArchConfig chip = reference_arch_fp8();

  std::uint32_t chips() const { return chips_x * chips_y; }
};

std::vector<std::string> validate(const WaferConfig& w);

struct ParallelismPlan {
  std::uint32_t ep_degree = 32;
  std::uint32_t pp_degree = 2;
  std::uint32_t batch_per_chip = 256;  // users
  std::uint32_t layers = 61;
  std::uint32_t spec_len = 2;
  double acceptance_rate = 0.7;
  std::uint32_t kv_len = 4096;
  std::uint64_t routing_seed = 1;

  double tokens_per_step() const { return 1.0 + acceptance_rate * (spec_len - 1.0); }
  /// Query tokens each chip pushes through a layer per iteration.
  std::uint32_t tokens() const { return batch_per_chip * spec_len; }
};

std::vector<std::string> validate(const ParallelismPlan& p, const WaferConfig& w);

/// DeepSeek-v3 decoder shapes.
struct DecoderLayerSpec {
  std::uint32_t d_model = 7168;
  std::uint32_t heads = 128;
  std::uint32_t head_dim = 128;
  std::uint32_t rope_dim = 64;
  std::uint32_t q_rank = 1536;
  std::uint32_t kv_rank = 512;
  std::uint32_t routed_experts = 256;
  std::uint32_t shared_experts = 1;
  std::uint32_t top_k = 8;
  std::uint32_t expert_inter = 2048;

  /// Weight bytes of one MoE layer holding `experts` routed experts.
  double weight_bytes(std::uint32_t experts, std::uint32_t dtype_bytes) const;
};

enum class AttentionDataflow { kFlatAttention, kFlashMlaLike };
const char* to_string(AttentionDataflow d);
AttentionDataflow attention_dataflow_from_string(const std::string& s);

struct KernelTime {
  std::string name;
  double seconds = 0;
  bool attention = false;
  bool c2c = false;
};

struct ServingReport {
  double t_iter = 0;               // seconds per decode iteration
  double tpot_ms = 0;
  double system_throughput = 0;    // tokens/s over the wafer
  double per_chip_throughput = 0;  // tokens/s
  double c2c_fraction = 0;
  double attention_fraction = 0;
  double layer_seconds = 0;
  std::vector<KernelTime> layer;   // one MoE layer, in execution order
};

/// Single-chip kernel simulations memoized by shape. Not thread-safe.
class WaferModel {
 public:
  explicit WaferModel(DecoderLayerSpec spec = {}) : spec_(spec) {}

  const DecoderLayerSpec& spec() const { return spec_; }

  /// Kernel times of one MoE decoder layer on one chip, barrier separated.
  std::vector<KernelTime> layer_time(const ArchConfig& chip, const ParallelismPlan& plan,
                                     AttentionDataflow dataflow);

  /// All-to-all dispatch or combine across the EP group, seconds.
  double c2c_time(const ParallelismPlan& plan, const WaferConfig& wafer);

  ServingReport serve(const ParallelismPlan& plan, const WaferConfig& wafer,
                      AttentionDataflow dataflow);

  std::size_t cached_kernels() const { return cache_.size(); }

 private:
  double gemm_cycles(const ArchConfig& chip, std::uint32_t m, std::uint32_t n, std::uint32_t k);
  double attention_cycles(const ArchConfig& chip, const ParallelismPlan& plan,
                          AttentionDataflow dataflow);
  double experts_cycles(const ArchConfig& chip, const std::vector<std::uint32_t>& tokens);
  double elementwise_cycles(const ArchConfig& chip, std::uint64_t elements, double flops,
                            double bytes);
  std::vector<std::uint32_t> routed_tokens(const ParallelismPlan& plan) const;

  DecoderLayerSpec spec_;
  std::map<std::string, double> cache_;
};

}  // namespace flatsim
