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
#include <stdexcept>
#include <string>
#include <vector>

#include "flatsim/arch.hpp"
#include "flatsim/dataflows.hpp"
#include "flatsim/noc.hpp"
#include "flatsim/numerics.hpp"
#include "flatsim/wafer.hpp"

namespace flatsim::tools {

/// Bad or missing configuration. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TilingMode { kAuto, kManual };
enum class OutputFormat { kCsv, kJsonl };

struct WorkloadGrid {
  std::vector<AttentionVariant> variants{AttentionVariant::kMhaPrefill};
  std::vector<std::uint32_t> seq{1024};       // KV length (and query length for prefill)
  std::vector<std::uint32_t> head_dim{128};
  std::vector<std::uint32_t> heads{32};
  std::vector<std::uint32_t> batch{2};
  std::vector<std::uint32_t> group_size{1};   // GQA
  std::vector<std::uint32_t> spec_len{1};     // decode query length
  std::uint32_t latent_rank = 512;
  std::uint32_t rope_dim = 64;
  bool causal = false;
};

struct TilingSettings {
  TilingMode mode = TilingMode::kAuto;
  std::uint32_t gx = 0, gy = 0;                // 0: chosen by the autotuner
  std::uint32_t slice_r = 0, slice_c = 0;      // manual mode only
  std::uint32_t flash_block = 128;
};

struct CollectiveGrid {
  std::vector<Bytes> sizes;
  std::vector<CollectiveKind> kinds{CollectiveKind::kMulticast, CollectiveKind::kReduceSum};
  std::uint32_t extent = 32;
};

struct WaferSettings {
  WaferConfig wafer;
  ParallelismPlan plan;
  std::vector<std::uint32_t> batches{256};
  std::vector<std::uint32_t> ep_degrees;       // empty: plan.ep_degree only
  std::vector<AttentionDataflow> dataflows{AttentionDataflow::kFlatAttention,
                                           AttentionDataflow::kFlashMlaLike};
};

struct ValidateSettings {
  std::uint32_t max_seq = 128;
  std::uint32_t max_head_dim = 32;
  std::uint32_t max_group = 4;
  double tolerance = 1e-6;
  std::uint64_t seed = 7;
};

struct Experiment {
  std::string name = "experiment";
  std::string source;                           // config path
  ArchConfig arch = reference_arch();
  WorkloadGrid workload;
  std::vector<Dataflow> dataflows = all_dataflows();
  TilingSettings tiling;
  CollectiveGrid collectives;
  WaferSettings wafer;
  ValidateSettings validate;
  std::string output;                           // empty: stdout
  OutputFormat format = OutputFormat::kCsv;
  unsigned jobs = 1;
};

/// Parses an INI config. Unknown keys and malformed values throw ConfigError.
Experiment load_experiment(const std::string& path);
Experiment parse_experiment(const std::string& ini_text, const std::string& source = "<string>");

/// Non-empty grids, valid arch and wafer.
std::vector<std::string> validate(const Experiment& e);

/// The attention workload of one grid point.
AttentionWorkload make_workload(const WorkloadGrid& g, AttentionVariant v, std::uint32_t seq,
                                std::uint32_t head_dim, std::uint32_t heads, std::uint32_t batch,
                                std::uint32_t group_size, std::uint32_t spec_len,
                                std::uint32_t dtype_bytes);

/// Cartesian product of the workload grid in a fixed order.
std::vector<AttentionWorkload> expand_workloads(const Experiment& e);

OutputFormat output_format_from_string(const std::string& s);

}  // namespace flatsim::tools
