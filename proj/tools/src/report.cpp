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

#include "flatsim_tools/report.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace flatsim::tools {

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Row& Row::set(std::string key, Value v) {
  for (auto& [k, old] : cells_) {
    if (k == key) {
      old = std::move(v);
      return *this;
    }
  }
  cells_.emplace_back(std::move(key), std::move(v));
  return *this;
}

const Value* Row::find(const std::string& key) const {
  for (const auto& [k, v] : cells_)
    if (k == key) return &v;
  return nullptr;
}

std::string format_value(const Value& v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return fmt::format("{}", i); }
    std::string operator()(std::uint64_t u) const { return fmt::format("{}", u); }
    std::string operator()(double d) const {
      if (!std::isfinite(d)) return "";
      return fmt::format("{}", d);
    }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, v);
}

void ReportWriter::write(const Row& row) {
  if (format_ == OutputFormat::kJsonl) {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : row.cells()) {
      std::visit(
          [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
              j[k] = nullptr;
            } else if constexpr (std::is_same_v<T, double>) {
              if (std::isfinite(x)) j[k] = x;
              else j[k] = nullptr;
            } else {
              j[k] = x;
            }
          },
          v);
    }
    out_ << j.dump() << '\n';
    return;
  }
  if (columns_.empty()) {
    for (const auto& [k, v] : row.cells()) columns_.push_back(k);
    std::string header;
    for (const auto& c : columns_) header += (header.empty() ? "" : ",") + csv_escape(c);
    out_ << header << '\n';
  }
  if (row.cells().size() != columns_.size())
    throw std::logic_error("report row does not match the header");
  std::string line;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (row.cells()[i].first != columns_[i])
      throw std::logic_error("report column '" + row.cells()[i].first + "' out of order");
    if (i) line += ',';
    line += csv_escape(format_value(row.cells()[i].second));
  }
  out_ << line << '\n';
}

}  // namespace flatsim::tools
