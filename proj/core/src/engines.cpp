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

#include "flatsim/engines.hpp"

#include <algorithm>
#include <cmath>

namespace flatsim {

namespace {
std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }
}  // namespace

Cycles gemm_cycles(const GemmJob& job, const TileSpec& tile) {
  if (job.m == 0 || job.n == 0 || job.k == 0) throw ContractViolation("gemm_cycles: zero dim");
  return ceil_div(job.m, tile.matrix_ce_rows) * ceil_div(job.n, tile.matrix_ce_cols) * job.k +
         tile.matrix_setup_cycles;
}

double gemm_ideal_cycles(const GemmJob& job, const TileSpec& tile) {
  return 2.0 * job.m * job.n * job.k / static_cast<double>(tile.matrix_flop_per_cycle());
}

double gemm_utilization(const GemmJob& job, const TileSpec& tile) {
  return gemm_ideal_cycles(job, tile) / static_cast<double>(gemm_cycles(job, tile));
}

const char* to_string(VectorKind k) {
  switch (k) {
    case VectorKind::kRowMax: return "rowmax";
    case VectorKind::kRowSum: return "rowsum";
    case VectorKind::kExp: return "exp";
    case VectorKind::kScaleAccumulate: return "scale_accumulate";
    case VectorKind::kAdd: return "add";
    case VectorKind::kRope: return "rope";
    case VectorKind::kRmsNorm: return "rmsnorm";
  }
  return "?";
}

std::uint32_t vector_flops_per_element(VectorKind k) {
  switch (k) {
    case VectorKind::kRowMax:
    case VectorKind::kRowSum:
    case VectorKind::kAdd:
    case VectorKind::kExp:
      return 1;
    case VectorKind::kScaleAccumulate: return 2;
    case VectorKind::kRope: return 4;
    case VectorKind::kRmsNorm: return 3;
  }
  return 1;
}

double vector_bytes_factor(VectorKind k) {
  switch (k) {
    case VectorKind::kRowMax:
    case VectorKind::kRowSum:
      return 1.5;
    case VectorKind::kExp:
    case VectorKind::kRmsNorm:
      return 2.0;
    case VectorKind::kScaleAccumulate:
    case VectorKind::kAdd:
    case VectorKind::kRope:
      return 3.0;
  }
  return 2.0;
}

Cycles vector_cycles(const VectorJob& job, const TileSpec& tile) {
  if (job.elements == 0) return 0;
  const Cycles compute =
      ceil_div(job.elements * vector_flops_per_element(job.kind), tile.vector_flop_per_cycle);
  const double bytes = static_cast<double>(job.elements) * job.dtype_bytes *
                       vector_bytes_factor(job.kind);
  const auto memory = static_cast<Cycles>(std::ceil(bytes / tile.l1_bytes_per_cycle));
  return std::max(compute, memory);
}

HbmChannels::HbmChannels(const HbmSpec& spec) : spec_(spec), free_at_(spec.num_channels, 0) {}

Cycles HbmChannels::service_cycles(Bytes size) const {
  return ceil_div(size, spec_.channel_bytes_per_cycle);
}

HbmChannels::Service HbmChannels::serve(const HbmRequest& req, Cycles arrival) {
  if (req.size == 0) throw ContractViolation("hbm request of zero bytes");
  if (req.channel >= free_at_.size()) throw ContractViolation("hbm channel out of range");
  const Cycles begin = std::max(arrival, free_at_[req.channel]);
  const Cycles service = service_cycles(req.size);
  free_at_[req.channel] = begin + service;
  (req.direction == HbmDirection::kRead ? read_ : written_) += req.size;
  return {begin, begin + spec_.access_latency + service};
}

std::vector<Cycles> hbm_service(std::span<const HbmRequest> reqs, const HbmSpec& hbm) {
  HbmChannels channels(hbm);
  std::vector<Cycles> done;
  done.reserve(reqs.size());
  for (const auto& r : reqs) done.push_back(channels.serve(r, 0).complete);
  return done;
}

}  // namespace flatsim
