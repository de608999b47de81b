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
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flatsim_tools/config.hpp"

namespace flatsim::tools {

/// Bumped whenever a column is added, removed or renamed.
inline constexpr int kSchemaVersion = 1;

using Value = std::variant<std::monostate, bool, std::int64_t, std::uint64_t, double, std::string>;

/// One output record; column order is insertion order.
class Row {
 public:
  Row& set(std::string key, Value v);
  Row& set(std::string key, bool v) { return set(std::move(key), Value(v)); }
  Row& set(std::string key, int v) { return set(std::move(key), Value(std::int64_t{v})); }
  Row& set(std::string key, unsigned v) { return set(std::move(key), Value(std::uint64_t{v})); }
  Row& set(std::string key, const char* v) { return set(std::move(key), Value(std::string(v))); }

  const std::vector<std::pair<std::string, Value>>& cells() const { return cells_; }
  const Value* find(const std::string& key) const;

 private:
  std::vector<std::pair<std::string, Value>> cells_;
};

/// Writes rows in order. CSV emits the header from the first row; every
/// later row must carry the same columns.
class ReportWriter {
 public:
  ReportWriter(std::ostream& out, OutputFormat format) : out_(out), format_(format) {}

  void write(const Row& row);

 private:
  std::ostream& out_;
  OutputFormat format_;
  std::vector<std::string> columns_;
};

/// Shortest round-trip text for doubles; stable across runs.
std::string format_value(const Value& v);

}  // namespace flatsim::tools
