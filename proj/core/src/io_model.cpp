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

#include "flatsim/dataflows.hpp"

namespace flatsim {

namespace {
std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

IoModel make(std::uint64_t elements, std::uint32_t dtype) {
  return {elements, elements * dtype};
}
}  // namespace

IoModel io_flash(std::uint64_t B, std::uint64_t H, std::uint64_t D, std::uint64_t S,
                 std::uint64_t M, std::uint32_t dtype_bytes) {
  if (M == 0) throw ContractViolation("io_flash: M must be positive");
  const std::uint64_t blocks = ceil_div(S, M);
  return make(2 * B * H * D * S * (1 + blocks), dtype_bytes);
}

IoModel io_flat(std::uint64_t B, std::uint64_t H, std::uint64_t D, std::uint64_t S,
                std::uint64_t M, std::uint64_t N, std::uint32_t dtype_bytes) {
  if (M == 0 || N == 0) throw ContractViolation("io_flat: M and N must be positive");
  const std::uint64_t block = std::min(N * M, std::max<std::uint64_t>(S, 1));
  return make(2 * B * H * D * S * (1 + ceil_div(S, block)), dtype_bytes);
}

}  // namespace flatsim
