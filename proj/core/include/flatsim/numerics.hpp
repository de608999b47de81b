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

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace flatsim {

/// Dense row-major matrix in the functional working precision.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  Matrix transposed() const;
  Matrix block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const;
  void set_block(std::size_t r0, std::size_t c0, const Matrix& src);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Max over |a-b| / max(|b|, floor); floor keeps near-zero references from
/// dominating.
double max_relative_error(const Matrix& actual, const Matrix& expected, double floor = 1e-3);

/// Running statistics of a streaming softmax: per-row max, per-row
/// denominator and the unnormalized output accumulator.
struct SoftmaxState {
  std::vector<double> row_max;
  std::vector<double> row_denom;
  Matrix accum;

  static SoftmaxState empty(std::size_t rows, std::size_t value_cols);
  std::size_t rows() const { return row_max.size(); }
  Matrix finalize() const;
};

enum class AttentionVariant {
  kMhaPrefill,
  kMhaDecode,
  kMhaSpecDecode,
  kGqaDecode,
  kMlaDecodeAbsorbed,
};

const char* to_string(AttentionVariant v);
AttentionVariant attention_variant_from_string(const std::string& s);

struct AttentionWorkload {
  AttentionVariant variant = AttentionVariant::kMhaPrefill;
  std::uint32_t batch = 1;
  std::uint32_t heads = 1;
  std::uint32_t seq_q = 1;
  std::uint32_t seq_kv = 1;
  std::uint32_t head_dim = 64;
  std::uint32_t group_size = 1;   // query heads per KV head (GQA)
  std::uint32_t latent_rank = 0;  // d_c (MLA)
  std::uint32_t rope_dim = 0;     // decoupled RoPE dims carried by MLA keys
  std::uint32_t spec_len = 1;
  bool causal = false;
  std::uint32_t dtype_bytes = 2;
};

std::vector<std::string> validate(const AttentionWorkload& w);

/// Named tensor set for one workload. Per-head tensors are indexed
/// [b * heads + h] (Q, O) or [b * kv_heads + g] (K, V). MLA keeps latent
/// tensors indexed by batch: cq (S_q x q_rank or already-projected queries),
/// ckv (S_kv x d_c) and per-head up-projections.
struct AttentionTensors {
  std::vector<Matrix> q;
  std::vector<Matrix> k;
  std::vector<Matrix> v;
  // MLA only.
  std::vector<Matrix> c_q;       // [batch] S_q x q_rank
  std::vector<Matrix> c_kv;      // [batch] S_kv x d_c
  std::vector<Matrix> w_uq;      // [heads] q_rank x D
  std::vector<Matrix> w_uk;      // [heads] d_c x D
  std::vector<Matrix> w_uv;      // [heads] d_c x D
};

std::uint32_t kv_heads(const AttentionWorkload& w);

/// Deterministic random tensors matching the workload's shapes.
AttentionTensors random_tensors(const AttentionWorkload& w, std::uint64_t seed,
                                std::uint32_t mla_q_rank = 16);

/// Exact monolithic softmax attention per (batch, head); result indexed
/// [b * heads + h], each S_q x D. Scores are scaled by 1/sqrt(D). No output
/// projection is applied. For MLA the unabsorbed path is evaluated.
std::vector<Matrix> reference_attention(const AttentionWorkload& w,
                                        const AttentionTensors& t);

/// Single-head softmax(q k^T * scale) v with an optional causal mask where
/// query row r may attend keys <= r + causal_offset.
Matrix attention_head(const Matrix& q, const Matrix& k, const Matrix& v, double scale,
                      bool causal, std::int64_t causal_offset);

SoftmaxState online_softmax_update(const SoftmaxState& state, const Matrix& score_block,
                                   const Matrix& v_block);

SoftmaxState distributed_softmax_merge(std::span<const SoftmaxState> partials);

Matrix absorb_mla_weights(const Matrix& w_uq, const Matrix& w_uk);

Matrix reference_gemm(const Matrix& a, const Matrix& b);

/// Rotates consecutive (even, odd) column pairs by position-dependent angles.
Matrix apply_rope(const Matrix& x, std::size_t position0, double base = 10000.0);

}  // namespace flatsim
