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

#include "flatsim_tools/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace flatsim::tools {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name, std::set<std::string> allowed)
      : tree_(tree), name_(std::move(name)) {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!child.empty()) throw ConfigError(fmt::format("[{}] nested key '{}'", name_, key));
      if (!allowed.count(key)) throw ConfigError(fmt::format("[{}] unknown key '{}'", name_, key));
    }
  }

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string str(const std::string& key) const { return trim(tree_->get<std::string>(key)); }

  template <typename T>
  void get(const std::string& key, T& out) const {
    if (has(key)) out = parse<T>(key, str(key));
  }

  template <typename T>
  void list(const std::string& key, std::vector<T>& out) const {
    if (!has(key)) return;
    out.clear();
    for (const auto& item : split_list(str(key))) out.push_back(parse<T>(key, item));
    if (out.empty()) throw ConfigError(fmt::format("[{}] {}: grids non-empty", name_, key));
  }

  template <typename T, typename F>
  void list_with(const std::string& key, std::vector<T>& out, F&& conv) const {
    if (!has(key)) return;
    out.clear();
    for (const auto& item : split_list(str(key))) {
      try {
        out.push_back(conv(item));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("[{}] {}: {}", name_, key, e.what()));
      }
    }
    if (out.empty()) throw ConfigError(fmt::format("[{}] {}: grids non-empty", name_, key));
  }

 private:
  template <typename T>
  T parse(const std::string& key, const std::string& v) const {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      throw ConfigError(fmt::format("[{}] {}: expected boolean, got '{}'", name_, key, v));
    } else if constexpr (std::is_floating_point_v<T>) {
      try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<T>(d);
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("[{}] {}: expected number, got '{}'", name_, key, v));
      }
    } else {
      T out{};
      const char* end = v.data() + v.size();
      auto [p, ec] = std::from_chars(v.data(), end, out);
      if (ec != std::errc() || p != end)
        throw ConfigError(fmt::format("[{}] {}: expected integer, got '{}'", name_, key, v));
      return out;
    }
  }

  const pt::ptree* tree_;
  std::string name_;
};

const pt::ptree* child(const pt::ptree& root, const std::string& name) {
  auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

void read_arch(const Section& s, ArchConfig& a) {
  if (s.has("preset")) {
    const std::string p = s.str("preset");
    if (p == "reference") a = reference_arch();
    else if (p == "reference_fp8") a = reference_arch_fp8();
    else throw ConfigError("[arch] preset: unknown preset '" + p + "'");
  }
  s.get("mesh_x", a.noc.mesh_x);
  s.get("mesh_y", a.noc.mesh_y);
  s.get("link_bytes_per_cycle", a.noc.link_bytes_per_cycle);
  s.get("hop_latency", a.noc.hop_latency);
  s.get("hw_collectives", a.noc.hw_collectives_enabled);
  s.get("sync_barrier_cost", a.noc.sync_barrier_cost);
  s.get("ce_rows", a.tile.matrix_ce_rows);
  s.get("ce_cols", a.tile.matrix_ce_cols);
  s.get("matrix_setup_cycles", a.tile.matrix_setup_cycles);
  s.get("vector_flop_per_cycle", a.tile.vector_flop_per_cycle);
  s.get("l1_capacity", a.tile.l1_capacity);
  s.get("l1_bytes_per_cycle", a.tile.l1_bytes_per_cycle);
  s.get("dma_channels", a.tile.dma_channels);
  s.get("dma_setup_cycles", a.tile.dma_setup_cycles);
  s.get("hbm_channels", a.hbm.num_channels);
  s.get("hbm_channel_bytes_per_cycle", a.hbm.channel_bytes_per_cycle);
  s.get("hbm_latency", a.hbm.access_latency);
  s.get("hbm_capacity", a.hbm.capacity);
  s.get("frequency_hz", a.frequency_hz);
  s.get("dtype_bytes", a.dtype_bytes);
  if (s.has("hbm_edge")) {
    const std::string e = s.str("hbm_edge");
    if (e == "north") a.hbm.edge = MeshEdge::kNorth;
    else if (e == "south") a.hbm.edge = MeshEdge::kSouth;
    else if (e == "east") a.hbm.edge = MeshEdge::kEast;
    else if (e == "west") a.hbm.edge = MeshEdge::kWest;
    else throw ConfigError("[arch] hbm_edge: unknown edge '" + e + "'");
  }
}

}  // namespace

OutputFormat output_format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::kCsv;
  if (s == "jsonl") return OutputFormat::kJsonl;
  throw ConfigError("unknown output format '" + s + "' (csv, jsonl)");
}

Experiment parse_experiment(const std::string& ini_text, const std::string& source) {
  pt::ptree root;
  try {
    std::istringstream in(ini_text);
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: line {}: {}", source, e.line(), e.message()));
  }
  static const std::set<std::string> sections{"experiment", "arch",     "workload", "tiling",
                                              "collective", "wafer",    "validate"};
  for (const auto& [name, sub] : root) {
    if (sub.empty()) throw ConfigError(fmt::format("{}: key '{}' outside a section", source, name));
    if (!sections.count(name)) throw ConfigError(fmt::format("{}: unknown section [{}]", source, name));
  }

  Experiment e;
  e.source = source;

  const Section ex(child(root, "experiment"), "experiment",
                   {"name", "output", "format", "jobs", "dataflows"});
  ex.get("name", e.name);
  ex.get("output", e.output);
  if (ex.has("format")) e.format = output_format_from_string(ex.str("format"));
  ex.get("jobs", e.jobs);
  ex.list_with("dataflows", e.dataflows, dataflow_from_string);

  const Section arch(child(root, "arch"), "arch",
                     {"preset", "mesh_x", "mesh_y", "link_bytes_per_cycle", "hop_latency",
                      "hw_collectives", "sync_barrier_cost", "ce_rows", "ce_cols",
                      "matrix_setup_cycles", "vector_flop_per_cycle", "l1_capacity",
                      "l1_bytes_per_cycle", "dma_channels", "dma_setup_cycles", "hbm_channels",
                      "hbm_channel_bytes_per_cycle", "hbm_latency", "hbm_capacity", "hbm_edge",
                      "frequency_hz", "dtype_bytes"});
  read_arch(arch, e.arch);

  const Section wl(child(root, "workload"), "workload",
                   {"variants", "seq", "head_dim", "heads", "batch", "group_size", "spec_len",
                    "latent_rank", "rope_dim", "causal"});
  wl.list_with("variants", e.workload.variants, attention_variant_from_string);
  wl.list("seq", e.workload.seq);
  wl.list("head_dim", e.workload.head_dim);
  wl.list("heads", e.workload.heads);
  wl.list("batch", e.workload.batch);
  wl.list("group_size", e.workload.group_size);
  wl.list("spec_len", e.workload.spec_len);
  wl.get("latent_rank", e.workload.latent_rank);
  wl.get("rope_dim", e.workload.rope_dim);
  wl.get("causal", e.workload.causal);

  const Section tl(child(root, "tiling"), "tiling",
                   {"mode", "gx", "gy", "slice_r", "slice_c", "flash_block"});
  if (tl.has("mode")) {
    const std::string m = tl.str("mode");
    if (m == "auto") e.tiling.mode = TilingMode::kAuto;
    else if (m == "manual") e.tiling.mode = TilingMode::kManual;
    else throw ConfigError("[tiling] mode: expected auto or manual, got '" + m + "'");
  }
  tl.get("gx", e.tiling.gx);
  tl.get("gy", e.tiling.gy);
  tl.get("slice_r", e.tiling.slice_r);
  tl.get("slice_c", e.tiling.slice_c);
  tl.get("flash_block", e.tiling.flash_block);

  const Section co(child(root, "collective"), "collective", {"sizes", "kinds", "extent"});
  co.list("sizes", e.collectives.sizes);
  co.list_with("kinds", e.collectives.kinds, [](const std::string& s) {
    if (s == "multicast") return CollectiveKind::kMulticast;
    if (s == "reduce_sum") return CollectiveKind::kReduceSum;
    if (s == "reduce_max") return CollectiveKind::kReduceMax;
    throw std::invalid_argument("unknown collective kind '" + s + "'");
  });
  co.get("extent", e.collectives.extent);

  const Section wf(child(root, "wafer"), "wafer",
                   {"chips_x", "chips_y", "d2d_bandwidth", "d2d_latency", "ep_degree",
                    "pp_degree", "batch", "layers", "spec_len", "acceptance_rate", "kv_len",
                    "routing_seed", "attention"});
  WaferSettings& w = e.wafer;
  w.wafer.chip = child(root, "arch") ? e.arch : reference_arch_fp8();
  wf.get("chips_x", w.wafer.chips_x);
  wf.get("chips_y", w.wafer.chips_y);
  wf.get("d2d_bandwidth", w.wafer.d2d_bandwidth);
  wf.get("d2d_latency", w.wafer.d2d_latency);
  wf.list("ep_degree", w.ep_degrees);
  if (!w.ep_degrees.empty()) w.plan.ep_degree = w.ep_degrees.front();
  wf.get("pp_degree", w.plan.pp_degree);
  wf.list("batch", w.batches);
  wf.get("layers", w.plan.layers);
  wf.get("spec_len", w.plan.spec_len);
  wf.get("acceptance_rate", w.plan.acceptance_rate);
  wf.get("kv_len", w.plan.kv_len);
  wf.get("routing_seed", w.plan.routing_seed);
  wf.list_with("attention", w.dataflows, attention_dataflow_from_string);

  const Section va(child(root, "validate"), "validate",
                   {"max_seq", "max_head_dim", "max_group", "tolerance", "seed"});
  va.get("max_seq", e.validate.max_seq);
  va.get("max_head_dim", e.validate.max_head_dim);
  va.get("max_group", e.validate.max_group);
  va.get("tolerance", e.validate.tolerance);
  va.get("seed", e.validate.seed);

  if (auto errs = validate(e); !errs.empty()) {
    std::string msg = source + ":";
    for (const auto& s : errs) msg += " " + s + ";";
    msg.pop_back();
    throw ConfigError(msg);
  }
  return e;
}

Experiment load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), path);
}

std::vector<std::string> validate(const Experiment& e) {
  std::vector<std::string> v;
  const WorkloadGrid& g = e.workload;
  if (g.variants.empty() || g.seq.empty() || g.head_dim.empty() || g.heads.empty() ||
      g.batch.empty() || g.group_size.empty() || g.spec_len.empty() || e.dataflows.empty())
    v.emplace_back("grids non-empty");
  for (auto& s : flatsim::validate(e.arch).violations) v.push_back("arch: " + s);
  if (e.jobs < 1) v.emplace_back("jobs >= 1");
  if (e.tiling.mode == TilingMode::kManual &&
      (e.tiling.slice_r == 0 || e.tiling.slice_c == 0 || e.tiling.gx == 0 || e.tiling.gy == 0))
    v.emplace_back("manual tiling needs gx, gy, slice_r, slice_c");
  if (e.tiling.flash_block == 0) v.emplace_back("flash_block >= 1");
  if (e.collectives.extent < 2) v.emplace_back("collective extent >= 2");
  if (e.wafer.batches.empty() || e.wafer.dataflows.empty()) v.emplace_back("grids non-empty");
  for (auto& s : flatsim::validate(e.wafer.wafer)) v.push_back("wafer: " + s);
  std::vector<std::uint32_t> eps = e.wafer.ep_degrees;
  if (eps.empty()) eps.push_back(e.wafer.plan.ep_degree);
  for (std::uint32_t ep : eps) {
    ParallelismPlan p = e.wafer.plan;
    p.ep_degree = ep;
    for (auto& s : flatsim::validate(p, e.wafer.wafer)) v.push_back("plan: " + s);
  }
  if (!(e.validate.tolerance > 0)) v.emplace_back("validate tolerance > 0");
  for (auto d : {e.validate.max_seq, e.validate.max_head_dim, e.validate.max_group})
    if (d < 1) v.emplace_back("validate caps >= 1");
  return v;
}

AttentionWorkload make_workload(const WorkloadGrid& g, AttentionVariant v, std::uint32_t seq,
                                std::uint32_t head_dim, std::uint32_t heads, std::uint32_t batch,
                                std::uint32_t group_size, std::uint32_t spec_len,
                                std::uint32_t dtype_bytes) {
  AttentionWorkload w;
  w.variant = v;
  w.batch = batch;
  w.heads = heads;
  w.head_dim = head_dim;
  w.seq_kv = seq;
  w.dtype_bytes = dtype_bytes;
  w.causal = g.causal;
  switch (v) {
    case AttentionVariant::kMhaPrefill:
      w.seq_q = seq;
      break;
    case AttentionVariant::kMhaDecode:
      w.seq_q = 1;
      break;
    case AttentionVariant::kGqaDecode:
      w.seq_q = spec_len;
      w.spec_len = spec_len;
      w.group_size = group_size;
      break;
    case AttentionVariant::kMhaSpecDecode:
      w.seq_q = spec_len;
      w.spec_len = spec_len;
      break;
    case AttentionVariant::kMlaDecodeAbsorbed:
      w.seq_q = spec_len;
      w.spec_len = spec_len;
      w.latent_rank = g.latent_rank;
      w.rope_dim = g.rope_dim;
      break;
  }
  if (w.seq_q > w.seq_kv) w.seq_q = w.seq_kv;
  return w;
}

std::vector<AttentionWorkload> expand_workloads(const Experiment& e) {
  const WorkloadGrid& g = e.workload;
  std::vector<AttentionWorkload> out;
  for (auto v : g.variants)
    for (auto b : g.batch)
      for (auto h : g.heads)
        for (auto d : g.head_dim)
          for (auto s : g.seq)
            for (auto gs : g.group_size)
              for (auto sl : g.spec_len) {
                if (v != AttentionVariant::kGqaDecode && gs != g.group_size.front()) continue;
                if ((v == AttentionVariant::kMhaPrefill || v == AttentionVariant::kMhaDecode) &&
                    sl != g.spec_len.front())
                  continue;
                out.push_back(make_workload(g, v, s, d, h, b, gs, sl, e.arch.dtype_bytes));
              }
  return out;
}

}  // namespace flatsim::tools
