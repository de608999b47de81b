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

#include <functional>
#include <string>
#include <vector>

#include "flatsim/dataflows.hpp"
#include "flatsim/schedule.hpp"
#include "flatsim/tiling.hpp"
#include "flatsim_tools/config.hpp"
#include "flatsim_tools/report.hpp"

namespace flatsim::tools {

/// Rows in grid order plus the number of rows whose simulation failed.
struct RunOutcome {
  std::vector<Row> rows;
  int failures = 0;
};

struct BuiltSchedule {
  Schedule schedule;
  TilingChoice tiling;  // gx/gy/slices actually used (FA: 1x1 group, slice = M)
};

/// Generates the schedule of one dataflow for one workload under the
/// experiment's tiling settings.
BuiltSchedule build_schedule(const AttentionWorkload& w, const ArchConfig& arch, Dataflow d,
                             const TilingSettings& tiling);

/// Closed-form HBM bytes for the schedule, when one exists (non-causal MHA
/// prefill); 0 otherwise.
Bytes closed_form_io(const AttentionWorkload& w, Dataflow d, const TilingChoice& t);

/// One row per (workload, dataflow); `simulate` requires a single workload.
RunOutcome run_simulate(const Experiment& e);
/// Attention grid rows, or collective rows when [collective] sizes is set.
RunOutcome run_sweep(const Experiment& e);
/// One row per (workload, candidate slice) with the selected row flagged.
RunOutcome run_autotune(const Experiment& e);
/// One row per (ep degree, batch, attention dataflow).
RunOutcome run_wafer(const Experiment& e);
/// One row per functional case.
RunOutcome run_validate(const Experiment& e);

struct FunctionalCase {
  std::string name;
  double max_rel_error = 0;
  bool schedule_ok = true;
  bool pass = false;
  std::string error;
};

using ScheduleMutator = std::function<void(Schedule&)>;

/// Functional-mode oracle suite over every dataflow and attention variant
/// plus SUMMA, on shapes within the caps. `mutate`, when set, is applied to
/// each schedule before execution (fault-injection fixtures).
std::vector<FunctionalCase> validate_functional(const ValidateSettings& caps,
                                                const ArchConfig& base,
                                                const ScheduleMutator& mutate = {});

}  // namespace flatsim::tools
