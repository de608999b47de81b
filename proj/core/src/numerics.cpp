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

#include "flatsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "flatsim/arch.hpp"

namespace flatsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// exp(a - b) with the all-masked convention: a row whose max is still -inf
// contributes nothing.
double shifted_exp(double a, double b) {
  if (a == kNegInf) return 0.0;
  return std::exp(a - b);
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ContractViolation("ragged matrix literal");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t rows,
                     std::size_t cols) const {
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows && r0 + i < rows_; ++i)
    for (std::size_t j = 0; j < cols && c0 + j < cols_; ++j)
      out(i, j) = (*this)(r0 + i, c0 + j);
  return out;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& src) {
  for (std::size_t i = 0; i < src.rows() && r0 + i < rows_; ++i)
    for (std::size_t j = 0; j < src.cols() && c0 + j < cols_; ++j)
      (*this)(r0 + i, c0 + j) = src(i, j);
}

double max_relative_error(const Matrix& actual, const Matrix& expected, double floor) {
  if (actual.rows() != expected.rows() || actual.cols() != expected.cols())
    return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  auto a = actual.values();
  auto e = expected.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) return std::numeric_limits<double>::infinity();
    const double denom = std::max(std::abs(e[i]), floor);
    worst = std::max(worst, std::abs(a[i] - e[i]) / denom);
  }
  return worst;
}

SoftmaxState SoftmaxState::empty(std::size_t rows, std::size_t value_cols) {
  SoftmaxState s;
  s.row_max.assign(rows, kNegInf);
  s.row_denom.assign(rows, 0.0);
  s.accum = Matrix(rows, value_cols);
  return s;
}

Matrix SoftmaxState::finalize() const {
  Matrix out = accum;
  for (std::size_t r = 0; r < rows(); ++r) {
    const double d = row_denom[r];
    for (double& v : out.row(r)) v = d > 0 ? v / d : 0.0;
  }
  return out;
}

const char* to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::kMhaPrefill: return "mha_prefill";
    case AttentionVariant::kMhaDecode: return "mha_decode";
    case AttentionVariant::kMhaSpecDecode: return "mha_spec_decode";
    case AttentionVariant::kGqaDecode: return "gqa_decode";
    case AttentionVariant::kMlaDecodeAbsorbed: return "mla_decode";
  }
  return "?";
}

AttentionVariant attention_variant_from_string(const std::string& s) {
  for (auto v : {AttentionVariant::kMhaPrefill, AttentionVariant::kMhaDecode,
                 AttentionVariant::kMhaSpecDecode, AttentionVariant::kGqaDecode,
                 AttentionVariant::kMlaDecodeAbsorbed}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown attention variant '" + s + "'");
}

std::vector<std::string> validate(const AttentionWorkload& w) {
  std::vector<std::string> v;
  if (w.batch < 1) v.emplace_back("batch >= 1");
  if (w.heads < 1) v.emplace_back("heads >= 1");
  if (w.seq_q < 1) v.emplace_back("seq_q >= 1");
  if (w.seq_kv < 1) v.emplace_back("seq_kv >= 1");
  if (w.head_dim < 1) v.emplace_back("head_dim >= 1");
  if (w.dtype_bytes < 1) v.emplace_back("dtype_bytes >= 1");
  switch (w.variant) {
    case AttentionVariant::kMhaDecode:
      if (w.seq_q != 1) v.emplace_back("seq_q = 1 for mha_decode");
      break;
    case AttentionVariant::kMhaSpecDecode:
      if (w.seq_q != w.spec_len) v.emplace_back("seq_q = spec_len for spec decode");
      break;
    case AttentionVariant::kGqaDecode:
      if (w.group_size < 1 || w.heads % w.group_size != 0)
        v.emplace_back("heads mod group_size = 0 for gqa_decode");
      break;
    case AttentionVariant::kMlaDecodeAbsorbed:
      if (w.latent_rank < 1) v.emplace_back("latent_rank > 0 for mla_decode");
      break;
    case AttentionVariant::kMhaPrefill:
      break;
  }
  return v;
}

std::uint32_t kv_heads(const AttentionWorkload& w) {
  switch (w.variant) {
    case AttentionVariant::kGqaDecode: return w.heads / std::max(1u, w.group_size);
    case AttentionVariant::kMlaDecodeAbsorbed: return 1;
    default: return w.heads;
  }
}

AttentionTensors random_tensors(const AttentionWorkload& w, std::uint64_t seed,
                                std::uint32_t mla_q_rank) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  auto rand = [&](std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (double& x : m.values()) x = dist(rng) * scale;
    return m;
  };
  AttentionTensors t;
  if (w.variant == AttentionVariant::kMlaDecodeAbsorbed) {
    const double s = 1.0 / std::sqrt(static_cast<double>(w.latent_rank));
    for (std::uint32_t b = 0; b < w.batch; ++b) {
      t.c_q.push_back(rand(w.seq_q, mla_q_rank));
      t.c_kv.push_back(rand(w.seq_kv, w.latent_rank));
    }
    for (std::uint32_t h = 0; h < w.heads; ++h) {
      t.w_uq.push_back(rand(mla_q_rank, w.head_dim, 1.0 / std::sqrt(mla_q_rank)));
      t.w_uk.push_back(rand(w.latent_rank, w.head_dim, s));
      t.w_uv.push_back(rand(w.latent_rank, w.head_dim, s));
    }
    return t;
  }
  const std::uint32_t kvh = kv_heads(w);
  for (std::uint32_t i = 0; i < w.batch * w.heads; ++i)
    t.q.push_back(rand(w.seq_q, w.head_dim));
  for (std::uint32_t i = 0; i < w.batch * kvh; ++i) {
    t.k.push_back(rand(w.seq_kv, w.head_dim));
    t.v.push_back(rand(w.seq_kv, w.head_dim));
  }
  return t;
}

Matrix attention_head(const Matrix& q, const Matrix& k, const Matrix& v, double scale,
                      bool causal, std::int64_t causal_offset) {
  if (q.cols() != k.cols() || k.rows() != v.rows())
    throw ContractViolation("attention_head: shape mismatch");
  Matrix out(q.rows(), v.cols());
  std::vector<double> s(k.rows());
  for (std::size_t r = 0; r < q.rows(); ++r) {
    double mx = kNegInf;
    for (std::size_t j = 0; j < k.rows(); ++j) {
      if (causal && static_cast<std::int64_t>(j) > static_cast<std::int64_t>(r) + causal_offset) {
        s[j] = kNegInf;
        continue;
      }
      double acc = 0;
      for (std::size_t d = 0; d < q.cols(); ++d) acc += q(r, d) * k(j, d);
      s[j] = acc * scale;
      mx = std::max(mx, s[j]);
    }
    double denom = 0;
    for (std::size_t j = 0; j < k.rows(); ++j) {
      s[j] = shifted_exp(s[j], mx);
      denom += s[j];
    }
    if (denom == 0) continue;
    for (std::size_t j = 0; j < k.rows(); ++j)
      for (std::size_t d = 0; d < v.cols(); ++d) out(r, d) += s[j] / denom * v(j, d);
  }
  return out;
}

std::vector<Matrix> reference_attention(const AttentionWorkload& w,
                                        const AttentionTensors& t) {
  if (auto errs = validate(w); !errs.empty())
    throw ContractViolation("reference_attention: invalid workload: " + errs.front());
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.head_dim));
  const std::int64_t offset =
      static_cast<std::int64_t>(w.seq_kv) - static_cast<std::int64_t>(w.seq_q);
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(w.batch) * w.heads);
  if (w.variant == AttentionVariant::kMlaDecodeAbsorbed) {
    if (t.c_q.size() != w.batch || t.c_kv.size() != w.batch || t.w_uq.size() != w.heads ||
        t.w_uk.size() != w.heads || t.w_uv.size() != w.heads)
      throw ContractViolation("reference_attention: MLA tensor count mismatch");
    for (std::uint32_t b = 0; b < w.batch; ++b) {
      for (std::uint32_t h = 0; h < w.heads; ++h) {
        Matrix q = reference_gemm(t.c_q[b], t.w_uq[h]);
        Matrix k = reference_gemm(t.c_kv[b], t.w_uk[h]);
        Matrix v = reference_gemm(t.c_kv[b], t.w_uv[h]);
        out.push_back(attention_head(q, k, v, scale, w.causal, offset));
      }
    }
    return out;
  }
  const std::uint32_t kvh = kv_heads(w);
  const std::uint32_t per_kv = w.heads / kvh;
  if (t.q.size() != static_cast<std::size_t>(w.batch) * w.heads ||
      t.k.size() != static_cast<std::size_t>(w.batch) * kvh || t.v.size() != t.k.size())
    throw ContractViolation("reference_attention: tensor count mismatch");
  for (std::uint32_t b = 0; b < w.batch; ++b) {
    for (std::uint32_t h = 0; h < w.heads; ++h) {
      const auto& q = t.q[b * w.heads + h];
      const auto& k = t.k[b * kvh + h / per_kv];
      const auto& v = t.v[b * kvh + h / per_kv];
      if (q.rows() != w.seq_q || q.cols() != w.head_dim || k.rows() != w.seq_kv ||
          k.cols() != w.head_dim || v.rows() != w.seq_kv)
        throw ContractViolation("reference_attention: tensor shape mismatch");
      out.push_back(attention_head(q, k, v, scale, w.causal, offset));
    }
  }
  return out;
}

SoftmaxState online_softmax_update(const SoftmaxState& state, const Matrix& score_block,
                                   const Matrix& v_block) {
  if (score_block.rows() != state.rows() || score_block.cols() != v_block.rows() ||
      v_block.cols() != state.accum.cols())
    throw ContractViolation("online_softmax_update: shape mismatch");
  SoftmaxState next = state;
  const std::size_t cols = v_block.cols();
  for (std::size_t r = 0; r < state.rows(); ++r) {
    double block_max = kNegInf;
    for (double s : score_block.row(r)) block_max = std::max(block_max, s);
    const double m_new = std::max(state.row_max[r], block_max);
    const double alpha = shifted_exp(state.row_max[r], m_new);
    double denom = alpha * state.row_denom[r];
    auto acc = next.accum.row(r);
    for (double& a : acc) a *= alpha;
    for (std::size_t j = 0; j < score_block.cols(); ++j) {
      const double p = shifted_exp(score_block(r, j), m_new);
      if (p == 0.0) continue;
      denom += p;
      for (std::size_t d = 0; d < cols; ++d) acc[d] += p * v_block(j, d);
    }
    next.row_max[r] = m_new;
    next.row_denom[r] = denom;
  }
  return next;
}

SoftmaxState distributed_softmax_merge(std::span<const SoftmaxState> partials) {
  if (partials.empty()) throw ContractViolation("distributed_softmax_merge: no partials");
  const std::size_t rows = partials.front().rows();
  const std::size_t cols = partials.front().accum.cols();
  for (const auto& p : partials)
    if (p.rows() != rows || p.accum.cols() != cols)
      throw ContractViolation("distributed_softmax_merge: row count mismatch");
  if (partials.size() == 1) return partials.front();

  SoftmaxState out = SoftmaxState::empty(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double m = kNegInf;
    for (const auto& p : partials) m = std::max(m, p.row_max[r]);
    out.row_max[r] = m;
    double denom = 0;
    auto acc = out.accum.row(r);
    for (const auto& p : partials) {
      const double alpha = shifted_exp(p.row_max[r], m);
      if (alpha == 0.0) continue;
      denom += alpha * p.row_denom[r];
      auto src = p.accum.row(r);
      for (std::size_t d = 0; d < cols; ++d) acc[d] += alpha * src[d];
    }
    out.row_denom[r] = denom;
  }
  return out;
}

Matrix absorb_mla_weights(const Matrix& w_uq, const Matrix& w_uk) {
  if (w_uq.cols() != w_uk.cols())
    throw ContractViolation("absorb_mla_weights: head dimensions differ");
  return reference_gemm(w_uq, w_uk.transposed());
}

Matrix reference_gemm(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ContractViolation("reference_gemm: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double x = a(i, k);
      if (x == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += x * brow[j];
    }
  }
  return c;
}

Matrix apply_rope(const Matrix& x, std::size_t position0, double base) {
  Matrix out = x;
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double pos = static_cast<double>(position0 + r);
    for (std::size_t i = 0; i + 1 < d; i += 2) {
      const double theta = pos * std::pow(base, -static_cast<double>(i) / d);
      const double c = std::cos(theta), s = std::sin(theta);
      out(r, i) = x(r, i) * c - x(r, i + 1) * s;
      out(r, i + 1) = x(r, i) * s + x(r, i + 1) * c;
    }
  }
  return out;
}

}  // namespace flatsim
